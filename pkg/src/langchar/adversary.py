"""Latent-conditioned adversarial discriminator and skill reward.

D(s, s', z) classifies whether a state transition comes from the motion
clip encoded by z, versus from the policy or from other clips.  The
training loss has four terms: real positives, policy negatives (weight
w_D), other-clip negatives (weight 1 - w_D), and a gradient penalty on
real samples.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import (
    MlpSpec,
    ParamSet,
    init_mlp_params,
    mlp_forward,
    mlp_apply,
    mlp_input_gradient,
)
from . import checkpoint as ckpt

SCORE_CLAMP = 1e-4
REWARD_MAX = -np.log(SCORE_CLAMP)


@dataclass
class DiscLossConfig:
    w_d: float = 0.5
    w_gp: float = 5.0

    def __post_init__(self):
        if not (0.0 <= self.w_d <= 1.0):
            raise ValueError("w_d must lie in [0, 1]")
        if self.w_gp < 0:
            raise ValueError("w_gp must be non-negative")


class Discriminator:
    """MLP over concat(s, s', z) with clamped sigmoid output.

    marginal=True zeroes the latent input, giving the z-invariant ablation
    discriminator.
    """

    def __init__(self, obs_dim, d_z, hidden=(128, 128, 64), params=None, rng=None, marginal=False):
        self.obs_dim = obs_dim
        self.d_z = d_z
        self.marginal = marginal
        self.spec = MlpSpec((2 * obs_dim + d_z, *hidden, 1))
        if params is None:
            params = init_mlp_params(self.spec, rng or np.random.default_rng(0), scale=0.1)
        self.params = params

    def _inputs(self, s, s_next, z):
        s = np.atleast_2d(np.asarray(s, dtype=np.float32))
        s_next = np.atleast_2d(np.asarray(s_next, dtype=np.float32))
        z = np.atleast_2d(np.asarray(z, dtype=np.float32))
        if z.shape[0] == 1 and s.shape[0] > 1:
            z = np.broadcast_to(z, (s.shape[0], z.shape[1]))
        if s.shape[1] != self.obs_dim or s_next.shape[1] != self.obs_dim:
            raise ValueError(
                f"state width mismatch: got {s.shape[1]}/{s_next.shape[1]}, want {self.obs_dim}"
            )
        if z.shape[1] != self.d_z:
            raise ValueError(f"latent width mismatch: got {z.shape[1]}, want {self.d_z}")
        if self.marginal:
            z = np.zeros_like(z)
        return np.concatenate([s, s_next, z], axis=1)

    def logits(self, s, s_next, z):
        return mlp_forward(self.spec, self.params, self._inputs(s, s_next, z))[..., 0]

    def score(self, s, s_next, z):
        """Clamped sigmoid probability, elementwise in the batch."""
        p = 1.0 / (1.0 + np.exp(-self.logits(s, s_next, z)))
        return np.clip(p, SCORE_CLAMP, 1.0 - SCORE_CLAMP)

    def skill_reward(self, s, s_next, z):
        """-log(1 - D); bounded in (0, -log(SCORE_CLAMP)] by the clamp."""
        return -np.log(1.0 - self.score(s, s_next, z))

    def save(self, path, config=None):
        extra = {"arch": {"obs_dim": self.obs_dim, "marginal": self.marginal,
                          "hidden": list(self.spec.sizes[1:-1])}}
        ckpt.save_checkpoint(path, "discriminator", self.params, self.d_z,
                             config=config or {}, extra=extra)

    @classmethod
    def load(cls, path):
        params, meta = ckpt.load_checkpoint(path, expect_kind="discriminator")
        arch = meta["arch"]
        return cls(arch["obs_dim"], meta["d_z"], hidden=tuple(arch["hidden"]),
                   params=params, marginal=arch["marginal"])


def disc_score(disc: Discriminator, s, s_next, z):
    return disc.score(s, s_next, z)


def skill_reward(disc: Discriminator, s, s_next, z):
    return disc.skill_reward(s, s_next, z)


def _clamped_sigmoid_graph(logit):
    return ad.clamp(ad.sigmoid(logit), SCORE_CLAMP, 1.0 - SCORE_CLAMP)


def disc_loss_graph(disc: Discriminator, tensors, real, agent, other, cfg: DiscLossConfig):
    """Build the four-term loss as an autodiff graph.

    real/agent/other are (s, s_next, z) batch triples; `other` may be None
    when w_d == 1.
    """
    for name, batch in (("real", real), ("agent", agent)):
        if batch[0].shape[0] == 0:
            raise ValueError(f"empty {name} batch")

    def scores(batch):
        x = disc._inputs(*batch)
        logit = mlp_apply(disc.spec, tensors, Tensor(x))
        return _clamped_sigmoid_graph(logit)

    d_real = scores(real)
    loss = ad.neg(ad.tmean(ad.log(d_real)))
    d_agent = scores(agent)
    one = Tensor(np.float32(1.0))
    loss = ad.add(loss, ad.mul(Tensor(np.float32(-cfg.w_d)),
                               ad.tmean(ad.log(ad.add(one, ad.neg(d_agent))))))
    if cfg.w_d < 1.0:
        if other is None or other[0].shape[0] == 0:
            raise ValueError("empty other-clip batch with w_d < 1")
        d_other = scores(other)
        loss = ad.add(loss, ad.mul(Tensor(np.float32(-(1.0 - cfg.w_d))),
                                   ad.tmean(ad.log(ad.add(one, ad.neg(d_other))))))
    if cfg.w_gp > 0:
        gp = gradient_penalty_graph(disc, tensors, real)
        loss = ad.add(loss, ad.mul(Tensor(np.float32(cfg.w_gp)), gp))
    return loss


def gradient_penalty_graph(disc: Discriminator, tensors, real):
    """Mean squared norm of dD/d(s, s') at real samples, differentiable in
    the discriminator parameters.  The latent block of the input gradient
    is excluded."""
    x = disc._inputs(*real)
    grad_logit = mlp_input_gradient(disc.spec, tensors, x)  # (B, 2*obs+d_z)
    grad_ss = ad.getitem(grad_logit, (slice(None), slice(0, 2 * disc.obs_dim)))
    logit = mlp_apply(disc.spec, tensors, Tensor(x))
    d = ad.sigmoid(logit)
    dsig = ad.mul(d, ad.add(Tensor(np.float32(1.0)), ad.neg(d)))  # sigmoid'
    grad_d = ad.mul(grad_ss, dsig)
    return ad.tmean(ad.tsum(ad.square(grad_d), axis=1))


def disc_loss(disc: Discriminator, real, agent, other, cfg: DiscLossConfig) -> float:
    tensors = {k: Tensor(v) for k, v in disc.params.items()}
    return float(disc_loss_graph(disc, tensors, real, agent, other, cfg).data)


def gradient_penalty(disc: Discriminator, real) -> float:
    tensors = {k: Tensor(v) for k, v in disc.params.items()}
    return float(gradient_penalty_graph(disc, tensors, real).data)


def disc_update(disc: Discriminator, real, agent, other, cfg: DiscLossConfig, adam, lr):
    """One optimizer step on the discriminator loss; returns the loss value."""
    from .nn import adam_step

    tensors = disc.params.as_tensors()
    loss = disc_loss_graph(disc, tensors, real, agent, other, cfg)
    value = float(loss.data)
    if not np.isfinite(value):
        return value
    loss.backward()
    grads = ParamSet()
    for name in disc.params:
        g = tensors[name].grad
        grads.add(name, g if g is not None else np.zeros_like(disc.params[name]), check_finite=False)
    adam_step(disc.params, grads, adam, lr)
    return value
