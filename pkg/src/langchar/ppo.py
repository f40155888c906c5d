"""Goal- and latent-conditioned PPO with the composite skill/task reward
and the adaptive task-weight controller."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import MlpSpec, ParamSet, AdamState, adam_step, init_mlp_params, mlp_forward, mlp_apply
from .adversary import Discriminator, DiscLossConfig, disc_update
from .motion_data import Dataset, sample_transition_batch
from . import sim
from . import tasks as task_mod
from . import checkpoint as ckpt

OBS_DIM = 7
ACT_DIM = 4
LOG_STD_INIT = float(np.log(0.2))
LOG_STD_MIN, LOG_STD_MAX = -4.0, 1.0
LOG_HEADER = "epoch,r_skill,r_task,lambda,disc_loss,pi_loss,v_loss,kl,clip_frac"


@dataclass
class PpoConfig:
    n_envs: int = 64
    rollout_len: int = 64
    epochs: int = 300
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 1e-3
    lr: float = 3e-4
    ppo_epochs: int = 4
    minibatches: int = 4
    disc_updates: int = 2  # discriminator-to-PPO update ratio
    disc_batch: int = 256
    disc_lr: float = 1e-3
    hidden: tuple = (128, 128, 64)
    w_d: float = 0.5
    w_gp: float = 5.0
    episode_ticks: int = 300
    marginal_disc: bool = False
    seed: int = 0


class GaussianPolicy:
    """(s, g, z) -> tanh-squashed diagonal Gaussian over drive commands."""

    def __init__(self, obs_dim, goal_dim, d_z, hidden=(128, 128, 64), params=None, rng=None):
        self.obs_dim, self.goal_dim, self.d_z = obs_dim, goal_dim, d_z
        self.spec = MlpSpec((obs_dim + goal_dim + d_z, *hidden, ACT_DIM))
        if params is None:
            params = init_mlp_params(self.spec, rng or np.random.default_rng(0), scale=0.01)
            params.add("log_std", np.full(ACT_DIM, LOG_STD_INIT, dtype=np.float32))
        self.params = params

    def input(self, s, g, z):
        return np.concatenate(
            [np.atleast_2d(s), np.atleast_2d(g), np.atleast_2d(z)], axis=-1
        ).astype(np.float32)

    def mean_std(self, x):
        mean = mlp_forward(self.spec, self.params, x)
        log_std = np.clip(self.params["log_std"], LOG_STD_MIN, LOG_STD_MAX)
        return mean, np.exp(log_std)

    def sample(self, s, g, z, rng):
        """Returns (action, pre_tanh, gaussian log-prob, full log-prob)."""
        x = self.input(s, g, z)
        mean, std = self.mean_std(x)
        noise = rng.standard_normal(mean.shape)
        u = mean + std * noise
        action = np.tanh(u)
        logp_gauss = gaussian_logp(u, mean, std)
        logp = logp_gauss - np.log(1 - action**2 + 1e-6).sum(axis=-1)
        return action, u, logp_gauss, logp

    def mode(self, s, g, z):
        x = self.input(s, g, z)
        mean, _ = self.mean_std(x)
        return np.tanh(mean)

    def save(self, path, config=None, extra=None):
        arch = {"obs_dim": self.obs_dim, "goal_dim": self.goal_dim,
                "hidden": list(self.spec.sizes[1:-1])}
        e = {"arch": arch}
        if extra:
            e.update(extra)
        ckpt.save_checkpoint(path, "policy", self.params, self.d_z, config=config or {}, extra=e)

    @classmethod
    def load(cls, path):
        params, meta = ckpt.load_checkpoint(path, expect_kind="policy")
        arch = meta["arch"]
        return cls(arch["obs_dim"], arch["goal_dim"], meta["d_z"],
                   hidden=tuple(arch["hidden"]), params=params)


def gaussian_logp(u, mean, std):
    return (
        -0.5 * ((u - mean) / std) ** 2 - np.log(std) - 0.5 * np.log(2 * np.pi)
    ).sum(axis=-1)


class ValueFunction:
    def __init__(self, obs_dim, goal_dim, d_z, hidden=(128, 128, 64), params=None, rng=None):
        self.spec = MlpSpec((obs_dim + goal_dim + d_z, *hidden, 1))
        if params is None:
            params = init_mlp_params(self.spec, rng or np.random.default_rng(1))
        self.params = params

    def value(self, x):
        return mlp_forward(self.spec, self.params, x)[..., 0]


def composite_reward(r_skill, r_task, lam=None):
    """r = r_skill + lambda * r_task; lambda omitted means skill-only."""
    if lam is None:
        return r_skill
    return r_skill + lam * r_task


@dataclass
class AdaptiveTaskWeight:
    """Log-space proportional controller on the buffer-mean task reward."""

    target: float
    lam: float = 3.0
    k_p: float = 0.1
    eps: float = 1e-5
    lo: float = 0.5
    hi: float = 3.0


def update_task_weight(state: AdaptiveTaskWeight, mean_task_reward: float) -> AdaptiveTaskWeight:
    if mean_task_reward < 0:
        raise ValueError("mean task reward must be non-negative")
    log_lam = np.log(state.lam) + state.k_p * (
        np.log(state.target + state.eps) - np.log(mean_task_reward + state.eps)
    )
    new_lam = float(np.clip(np.exp(log_lam), state.lo, state.hi))
    out = AdaptiveTaskWeight(state.target, new_lam, state.k_p, state.eps, state.lo, state.hi)
    return out


def gae_advantages(rewards, values, dones, last_value, gamma, lam):
    """Generalized advantage estimation over an (L, N) rollout block."""
    L, N = rewards.shape
    adv = np.zeros((L, N), dtype=np.float64)
    next_value = last_value
    next_adv = np.zeros(N)
    for t in reversed(range(L)):
        non_terminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * non_terminal - values[t]
        next_adv = delta + gamma * lam * non_terminal * next_adv
        adv[t] = next_adv
        next_value = values[t]
    returns = adv + values
    return adv, returns


@dataclass
class RolloutBuffer:
    obs: np.ndarray  # (L, N, OBS)
    next_obs: np.ndarray
    goals: np.ndarray  # (L, N, GOAL)
    latents: np.ndarray  # (L, N, d_z)
    pre_tanh: np.ndarray  # (L, N, ACT)
    logp_gauss: np.ndarray  # (L, N)
    r_skill: np.ndarray
    r_task: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    clip_idx: np.ndarray  # (L, N) int
    last_value: np.ndarray  # (N,)


class LatentProvider:
    """Maps clips and captions to conditioning vectors for the policy."""

    def __init__(self, d_z):
        self.d_z = d_z

    def episode_latent(self, clip, rng):
        raise NotImplementedError

    def caption_latent(self, caption):
        raise NotImplementedError


class EmbeddingLatents(LatentProvider):
    def __init__(self, embedding):
        super().__init__(embedding.cfg.d_z)
        self.embedding = embedding
        self._cache = {}

    def episode_latent(self, clip, rng):
        if clip.id not in self._cache:
            self._cache[clip.id] = self.embedding.encode_motion(clip.frames)
        return self._cache[clip.id]

    def caption_latent(self, caption):
        return self.embedding.encode_text(caption)


class RawTextLatents(LatentProvider):
    """Conditions directly on the frozen 256-D hashed caption features."""

    def __init__(self):
        from .skill_embed import TEXT_DIM

        super().__init__(TEXT_DIM)

    def episode_latent(self, clip, rng):
        caption = clip.captions[int(rng.integers(len(clip.captions)))]
        return self.caption_latent(caption)

    def caption_latent(self, caption):
        from .skill_embed import featurize_text

        return featurize_text(caption)


class PcaTextLatents(LatentProvider):
    """Hashed caption features reduced to d_z axes by PCA, renormalized."""

    def __init__(self, dataset: Dataset, d_z):
        from .nn import pca_fit
        from .skill_embed import featurize_text

        super().__init__(d_z)
        feats = np.stack(
            [featurize_text(cap) for clip in dataset.clips for cap in clip.captions]
        )
        self.basis = pca_fit(feats, d_z)

    def _project(self, base):
        from .nn import pca_project

        v = pca_project(self.basis, base)
        n = np.linalg.norm(v)
        if n < 1e-12:
            raise ValueError("caption features project to the zero vector")
        return (v / n).astype(np.float32)

    def episode_latent(self, clip, rng):
        caption = clip.captions[int(rng.integers(len(clip.captions)))]
        return self.caption_latent(caption)

    def caption_latent(self, caption):
        from .skill_embed import featurize_text

        return self._project(featurize_text(caption))


class PpoTrainer:
    """Alternates rollout collection, discriminator updates, PPO updates,
    and adaptive task-weight updates."""

    def __init__(self, task, dataset: Dataset, latents: LatentProvider,
                 cfg: PpoConfig = None, env_config: sim.EnvConfig = None,
                 log_path=None):
        self.cfg = cfg or PpoConfig()
        self.task = None if task in (None, "none") else task
        self.dataset = dataset
        self.latents = latents
        self.env_config = env_config or sim.EnvConfig()
        self.log_path = log_path
        c = self.cfg
        self.rng = np.random.default_rng(c.seed)
        self.policy = GaussianPolicy(OBS_DIM, task_mod.GOAL_DIM, latents.d_z,
                                     hidden=c.hidden, rng=np.random.default_rng(c.seed + 1))
        self.value_fn = ValueFunction(OBS_DIM, task_mod.GOAL_DIM, latents.d_z,
                                      hidden=c.hidden, rng=np.random.default_rng(c.seed + 2))
        self.disc = Discriminator(OBS_DIM, latents.d_z, hidden=c.hidden,
                                  rng=np.random.default_rng(c.seed + 3),
                                  marginal=c.marginal_disc)
        self.pi_adam = AdamState.init(self.policy.params)
        self.v_adam = AdamState.init(self.value_fn.params)
        self.d_adam = AdamState.init(self.disc.params)
        self.disc_cfg = DiscLossConfig(w_d=c.w_d, w_gp=c.w_gp)
        if self.task:
            spec = task_mod.TASK_SPECS[self.task]
            if spec.adaptive_weight:
                self.task_weight = AdaptiveTaskWeight(target=spec.reward_target)
            else:
                self.task_weight = None  # constant weight
            self.const_lambda = 1.0
        self.env_rngs = [np.random.default_rng([c.seed, 100 + i]) for i in range(c.n_envs)]
        self._envs = [self._reset_env(i) for i in range(c.n_envs)]
        self.history = []

    @property
    def current_lambda(self):
        if not self.task:
            return None
        if self.task_weight is None:
            return self.const_lambda
        return self.task_weight.lam

    def _reset_env(self, i):
        rng = self.env_rngs[i]
        world = sim.reset(self.env_config, rng)
        clip_idx = int(rng.integers(len(self.dataset)))
        clip = self.dataset.clips[clip_idx]
        z = self.latents.episode_latent(clip, rng)
        goal = task_mod.sample_goal(self.task, world, rng) if self.task else None
        return {"world": world, "clip_idx": clip_idx, "z": np.asarray(z, dtype=np.float32),
                "goal": goal, "tick": 0}

    def collect_rollouts(self):
        c = self.cfg
        L, N = c.rollout_len, c.n_envs
        buf = RolloutBuffer(
            obs=np.zeros((L, N, OBS_DIM), np.float32),
            next_obs=np.zeros((L, N, OBS_DIM), np.float32),
            goals=np.zeros((L, N, task_mod.GOAL_DIM), np.float32),
            latents=np.zeros((L, N, self.latents.d_z), np.float32),
            pre_tanh=np.zeros((L, N, ACT_DIM), np.float32),
            logp_gauss=np.zeros((L, N), np.float64),
            r_skill=np.zeros((L, N), np.float64),
            r_task=np.zeros((L, N), np.float64),
            rewards=np.zeros((L, N), np.float64),
            values=np.zeros((L, N), np.float64),
            dones=np.zeros((L, N), np.float64),
            clip_idx=np.zeros((L, N), np.int64),
            last_value=np.zeros(N, np.float64),
        )
        lam = self.current_lambda
        for t in range(L):
            obs = np.stack([sim.observe(e["world"]) for e in self._envs])
            goals = np.stack([task_mod.goal_features(e["world"], e["goal"]) for e in self._envs])
            zs = np.stack([e["z"] for e in self._envs])
            actions, u, logp_gauss, _ = self.policy.sample(obs, goals, zs, self.rng)
            x = self.policy.input(obs, goals, zs)
            values = self.value_fn.value(x)
            next_obs = np.zeros_like(obs)
            for i, env in enumerate(self._envs):
                env["world"] = sim.step(env["world"], actions[i])
                env["tick"] += 1
                next_obs[i] = sim.observe(env["world"])
                r_task = task_mod.task_reward(env["world"], env["goal"]) if self.task else 0.0
                buf.r_task[t, i] = r_task
                reason = task_mod.check_termination(env["world"], self.task, env["goal"], env["tick"]) \
                    if self.task else ("horizon" if env["tick"] >= c.episode_ticks else None)
                if reason is not None:
                    buf.dones[t, i] = 1.0
            r_skill = self.disc.skill_reward(obs, next_obs, zs)
            buf.obs[t], buf.next_obs[t] = obs, next_obs
            buf.goals[t], buf.latents[t] = goals, zs
            buf.pre_tanh[t], buf.logp_gauss[t] = u, logp_gauss
            buf.values[t] = values
            buf.r_skill[t] = r_skill
            buf.clip_idx[t] = [e["clip_idx"] for e in self._envs]
            buf.rewards[t] = composite_reward(r_skill, buf.r_task[t], lam)
            for i, env in enumerate(self._envs):
                if buf.dones[t, i]:
                    self._envs[i] = self._reset_env(i)
        obs = np.stack([sim.observe(e["world"]) for e in self._envs])
        goals = np.stack([task_mod.goal_features(e["world"], e["goal"]) for e in self._envs])
        zs = np.stack([e["z"] for e in self._envs])
        buf.last_value = self.value_fn.value(self.policy.input(obs, goals, zs))
        return buf

    def _disc_batches(self, buf):
        """Real / agent / other batches keyed on the buffer's episode clips."""
        c = self.cfg
        L, N = buf.r_skill.shape
        B = min(c.disc_batch, L * N)
        flat = self.rng.integers(L * N, size=B)
        ti, ni = np.unravel_index(flat, (L, N))
        agent = (buf.obs[ti, ni], buf.next_obs[ti, ni], buf.latents[ti, ni])
        clip_ids = buf.clip_idx[ti, ni]
        real_s = np.zeros((B, OBS_DIM), np.float32)
        real_sn = np.zeros((B, OBS_DIM), np.float32)
        other_s = np.zeros((B, OBS_DIM), np.float32)
        other_sn = np.zeros((B, OBS_DIM), np.float32)
        n_clips = len(self.dataset)
        for k in range(B):
            clip = self.dataset.clips[clip_ids[k]]
            s, sn = sample_transition_batch(clip, self.rng, 1)
            real_s[k], real_sn[k] = s[0], sn[0]
            if n_clips > 1:
                j = int(self.rng.integers(n_clips - 1))
                if j >= clip_ids[k]:
                    j += 1
            else:
                j = clip_ids[k]
            s, sn = sample_transition_batch(self.dataset.clips[j], self.rng, 1)
            other_s[k], other_sn[k] = s[0], sn[0]
        z = buf.latents[ti, ni]
        return (real_s, real_sn, z), agent, (other_s, other_sn, z)

    def ppo_update(self, buf):
        c = self.cfg
        adv, returns = gae_advantages(buf.rewards, buf.values, buf.dones,
                                      buf.last_value, c.gamma, c.gae_lambda)
        L, N = adv.shape
        n = L * N
        x = self.policy.input(
            buf.obs.reshape(n, -1), buf.goals.reshape(n, -1), buf.latents.reshape(n, -1)
        )
        u = buf.pre_tanh.reshape(n, -1).astype(np.float32)
        logp_old = buf.logp_gauss.reshape(n)
        adv_flat = adv.reshape(n)
        adv_norm = (adv_flat - adv_flat.mean()) / (adv_flat.std() + 1e-8)
        ret_flat = returns.reshape(n)

        metrics = {"pi_loss": 0.0, "v_loss": 0.0, "kl": 0.0, "clip_frac": 0.0}
        count = 0
        for _ in range(c.ppo_epochs):
            perm = self.rng.permutation(n)
            for mb in np.array_split(perm, c.minibatches):
                pi_loss, kl, clip_frac = self._policy_step(
                    x[mb], u[mb], logp_old[mb], adv_norm[mb]
                )
                v_loss = self._value_step(x[mb], ret_flat[mb])
                metrics["pi_loss"] += pi_loss
                metrics["v_loss"] += v_loss
                metrics["kl"] += kl
                metrics["clip_frac"] += clip_frac
                count += 1
        for k in metrics:
            metrics[k] /= count
        return metrics

    def _policy_step(self, x, u, logp_old, adv):
        c = self.cfg
        t = self.policy.params.as_tensors()
        loss = ppo_policy_loss_graph(self.policy.spec, t, x, u, logp_old, adv,
                                     c.clip, c.entropy_coef)
        value = float(loss.data)
        if not np.isfinite(value):
            return value, 0.0, 0.0
        loss.backward()
        grads = ParamSet()
        for name in self.policy.params:
            g = t[name].grad
            grads.add(name, g if g is not None else np.zeros_like(self.policy.params[name]), check_finite=False)
        adam_step(self.policy.params, grads, self.pi_adam, c.lr)
        # diagnostics
        mean, std = self.policy.mean_std(x)
        logp_new = gaussian_logp(u, mean, std)
        ratio = np.exp(logp_new - logp_old)
        kl = float(np.mean(logp_old - logp_new))
        clip_frac = float(np.mean(np.abs(ratio - 1) > c.clip))
        return value, kl, clip_frac

    def _value_step(self, x, returns):
        t = self.value_fn.params.as_tensors()
        v = mlp_apply(self.value_fn.spec, t, Tensor(x))
        diff = ad.add(ad.reshape(v, (-1,)), Tensor(-returns.astype(np.float32)))
        loss = ad.mul(Tensor(np.float32(0.5)), ad.tmean(ad.square(diff)))
        value = float(loss.data)
        if not np.isfinite(value):
            return value
        loss.backward()
        grads = ParamSet()
        for name in self.value_fn.params:
            g = t[name].grad
            grads.add(name, g if g is not None else np.zeros_like(self.value_fn.params[name]), check_finite=False)
        adam_step(self.value_fn.params, grads, self.v_adam, self.cfg.lr)
        return value

    def train_epoch(self):
        c = self.cfg
        buf = self.collect_rollouts()
        disc_loss_val = 0.0
        for _ in range(c.disc_updates):
            real, agent, other = self._disc_batches(buf)
            disc_loss_val = disc_update(self.disc, real, agent, other,
                                        self.disc_cfg, self.d_adam, c.disc_lr)
        if self.task and self.task_weight is not None:
            self.task_weight = update_task_weight(self.task_weight, float(buf.r_task.mean()))
        metrics = self.ppo_update(buf)
        row = {
            "epoch": len(self.history),
            "r_skill": float(buf.r_skill.mean()),
            "r_task": float(buf.r_task.mean()),
            "lambda": self.current_lambda if self.task else 0.0,
            "disc_loss": disc_loss_val,
            **metrics,
        }
        self.history.append(row)
        return row

    def train(self, epochs=None, progress=None):
        epochs = epochs or self.cfg.epochs
        writer = None
        f = None
        if self.log_path:
            f = open(self.log_path, "w", newline="")
            writer = csv.writer(f)
            writer.writerow(LOG_HEADER.split(","))
        try:
            for _ in range(epochs):
                row = self.train_epoch()
                if writer:
                    writer.writerow([row["epoch"], row["r_skill"], row["r_task"],
                                     row["lambda"], row["disc_loss"], row["pi_loss"],
                                     row["v_loss"], row["kl"], row["clip_frac"]])
                if progress:
                    progress(row)
        finally:
            if f:
                f.close()
        return self.policy

    def save(self, path):
        self.policy.save(path, config=asdict_safe(self.cfg),
                         extra={"task": self.task or "none"})


def ppo_policy_loss_graph(spec, tensors, x, u, logp_old, adv, clip_eps, entropy_coef):
    """Clipped-surrogate policy loss with entropy bonus, as a graph.

    The tanh change-of-variables terms depend only on the stored pre-tanh
    samples, so they cancel in the importance ratio and are omitted.
    """
    mean = mlp_apply(spec, tensors, Tensor(np.asarray(x, dtype=np.float32)))
    log_std = ad.clamp(tensors["log_std"], LOG_STD_MIN, LOG_STD_MAX)
    std = ad.exp(log_std)
    du = ad.add(Tensor(np.asarray(u, dtype=np.float32)), ad.neg(mean))
    zscore = ad.div(du, std)
    logp = ad.add(
        ad.tsum(ad.mul(Tensor(np.float32(-0.5)), ad.square(zscore)), axis=-1),
        ad.add(ad.neg(ad.tsum(log_std)), Tensor(np.float32(-0.5 * ACT_DIM * np.log(2 * np.pi)))),
    )
    ratio = ad.exp(ad.add(logp, Tensor(-np.asarray(logp_old, dtype=np.float32))))
    adv_t = Tensor(np.asarray(adv, dtype=np.float32))
    unclipped = ad.mul(ratio, adv_t)
    clipped = ad.mul(ad.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv_t)
    surrogate = ad.tmean(ad.minimum(unclipped, clipped))
    entropy = ad.tsum(log_std)  # Gaussian entropy up to a constant
    return ad.add(ad.neg(surrogate), ad.mul(Tensor(np.float32(-entropy_coef)), entropy))


def asdict_safe(cfg):
    d = asdict(cfg)
    d["hidden"] = list(d["hidden"])
    return d


def rollout(policy: GaussianPolicy, z, n_ticks=300, task=None, goal=None,
            env_config=None, seed=0, world=None, deterministic=False):
    """Roll the policy for n_ticks; returns (observations (n+1, 7), worlds)."""
    rng = np.random.default_rng(seed)
    if world is None:
        world = sim.reset(env_config or sim.EnvConfig(), rng)
    z = np.asarray(z, dtype=np.float32).reshape(1, -1)
    obs_seq = [sim.observe(world)]
    worlds = [world]
    for t in range(n_ticks):
        obs = obs_seq[-1].reshape(1, -1)
        g = task_mod.goal_features(world, goal).reshape(1, -1)
        if deterministic:
            action = policy.mode(obs, g, z)[0]
        else:
            action, _, _, _ = policy.sample(obs, g, z, rng)
            action = action[0]
        world = sim.step(world, action)
        obs_seq.append(sim.observe(world))
        worlds.append(world)
        if task and task_mod.check_termination(world, task, goal, t + 1):
            break
    return np.stack(obs_seq), worlds
