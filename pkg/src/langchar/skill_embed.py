"""Joint motion/text skill embedding.

A motion autoencoder (per-frame embedding -> one self-attention block ->
pooled latent -> query-based parallel decoder) is trained so that motion
latents also align with text latents from a frozen hashed featurizer plus
a small trainable head.  Latents live on the unit sphere.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import ParamSet, AdamState, adam_step, value_and_grad
from .motion_data import POSE_DIM, Dataset, random_subsequence
from . import checkpoint as ckpt

TEXT_DIM = 256


# -- frozen text featurizer ---------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _tokenize(caption: str):
    return [t for t in re.split(r"[^0-9a-z]+", caption.lower()) if t]


def featurize_text(caption: str) -> np.ndarray:
    """Deterministic 256-D unit-norm bag of hashed unigrams and bigrams."""
    tokens = _tokenize(caption)
    if not tokens:
        raise ValueError(f"caption {caption!r} has no tokens")
    vec = np.zeros(TEXT_DIM, dtype=np.float64)
    grams = list(tokens) + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    for g in grams:
        h = _fnv1a(g.encode("utf-8"))
        bucket = (h >> 16) % TEXT_DIM
        sign = 1.0 if (h >> 33) & 1 else -1.0
        vec[bucket] += sign
    n = np.linalg.norm(vec)
    if n == 0:
        raise ValueError(f"caption {caption!r} hashed to the zero vector")
    return (vec / n).astype(np.float32)


# -- losses -------------------------------------------------------------


def loss_recon(recon: np.ndarray, target: np.ndarray) -> float:
    """Mean over frames of squared frame-difference norms."""
    recon = np.asarray(recon, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if recon.shape != target.shape:
        raise ValueError(f"frame count mismatch: {recon.shape} vs {target.shape}")
    d = recon - target
    return float((d * d).sum(axis=-1).mean())


def loss_align(z_m: np.ndarray, z_l: np.ndarray) -> float:
    """Cosine distance 1 - cos(z_m, z_l), in [0, 2]."""
    z_m = np.asarray(z_m, dtype=np.float64)
    z_l = np.asarray(z_l, dtype=np.float64)
    nm, nl = np.linalg.norm(z_m), np.linalg.norm(z_l)
    if nm == 0 or nl == 0:
        raise ValueError("zero vector in alignment loss")
    return float(1.0 - (z_m @ z_l) / (nm * nl))


def slerp(z1: np.ndarray, z2: np.ndarray, t: float) -> np.ndarray:
    """Great-circle interpolation between unit vectors."""
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    c = float(np.clip(z1 @ z2, -1.0, 1.0))
    if c < -1.0 + 1e-9:
        raise ValueError("antipodal latents: slerp arc undefined")
    theta = np.arccos(c)
    if theta < 1e-9:
        out = z1.copy()
    else:
        out = (np.sin((1 - t) * theta) * z1 + np.sin(t * theta) * z2) / np.sin(theta)
    return out / np.linalg.norm(out)


# -- architecture -------------------------------------------------------


@dataclass
class EmbedConfig:
    d_z: int = 16
    d_model: int = 32
    d_att: int = 16
    n_max: int = 300
    min_sub_len: int = 30
    lr: float = 2e-3
    batch: int = 16
    steps: int = 600
    align_weight: float = 0.1
    seed: int = 0


def _sin_positions(n_max, d_model):
    pos = np.arange(n_max)[:, None]
    dim = np.arange(d_model)[None, :]
    angle = pos / np.power(300.0, 2 * (dim // 2) / d_model)
    pe = np.where(dim % 2 == 0, np.sin(angle), np.cos(angle))
    return pe.astype(np.float32)


def init_embedding_params(cfg: EmbedConfig, rng: np.random.Generator) -> ParamSet:
    d, da, dz = cfg.d_model, cfg.d_att, cfg.d_z
    p = ParamSet()

    def dense(name, fan_in, fan_out, scale=1.0):
        w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in) * scale
        p.add(f"{name}_w", w.astype(np.float32))
        p.add(f"{name}_b", np.zeros(fan_out, dtype=np.float32))

    # encoder
    dense("enc_in", POSE_DIM, d)
    dense("enc_q", d, da)
    dense("enc_k", d, da)
    dense("enc_v", d, d)
    dense("enc_ff", d, d)
    dense("enc_out", d, dz)
    # decoder
    p.add("dec_queries", (rng.standard_normal((cfg.n_max, d)) * 0.1).astype(np.float32))
    dense("dec_z", dz, d)
    dense("dec_q", d, da)
    dense("dec_k", d, da)
    dense("dec_v", d, d)
    dense("dec_ff", d, d)
    dense("dec_out", d, POSE_DIM)
    # text head (two dense layers)
    dense("txt_h0", TEXT_DIM, 64)
    dense("txt_h1", 64, dz)
    return p


def _dense(t, name, x):
    return ad.add(ad.matmul(x, t[f"{name}_w"]), t[f"{name}_b"])


def _attention(t, prefix, x, scale):
    q = _dense(t, f"{prefix}_q", x)
    k = _dense(t, f"{prefix}_k", x)
    v = _dense(t, f"{prefix}_v", x)
    scores = ad.mul(ad.matmul(q, ad.swapaxes(k, -1, -2)), Tensor(np.asarray(scale, dtype=x.data.dtype)))
    att = ad.matmul(ad.softmax(scores, axis=-1), v)
    h = ad.add(x, att)  # residual
    return ad.relu(_dense(t, f"{prefix}_ff", h))


def _normalize_rows(z):
    return ad.div(z, ad.norm(z, axis=-1, keepdims=True))


def encode_motion_graph(cfg: EmbedConfig, t, frames: np.ndarray):
    """frames (n, POSE_DIM) -> unit latent Tensor (d_z,)."""
    n = frames.shape[0]
    pe = _sin_positions(cfg.n_max, cfg.d_model)[:n].astype(frames.dtype)
    x = ad.add(_dense(t, "enc_in", Tensor(frames)), Tensor(pe))
    x = _attention(t, "enc", x, 1.0 / np.sqrt(cfg.d_att))
    pooled = ad.tmean(x, axis=0)
    z = _dense(t, "enc_out", ad.reshape(pooled, (1, -1)))
    return ad.reshape(_normalize_rows(z), (-1,))


def decode_motion_graph(cfg: EmbedConfig, t, z, n: int):
    """Latent -> (n, POSE_DIM) reconstruction Tensor."""
    u = ad.getitem(t["dec_queries"], slice(0, n))
    zx = _dense(t, "dec_z", ad.reshape(z, (1, -1)))
    x = ad.relu(ad.add(u, zx))
    x = _attention(t, "dec", x, 1.0 / np.sqrt(cfg.d_att))
    return _dense(t, "dec_out", x)


def encode_text_graph(cfg: EmbedConfig, t, base: np.ndarray):
    h = ad.relu(_dense(t, "txt_h0", Tensor(base.reshape(1, -1))))
    z = _dense(t, "txt_h1", h)
    return ad.reshape(_normalize_rows(z), (-1,))


class SkillEmbedding:
    """Frozen embedding checkpoint: motion encoder/decoder + text encoder."""

    def __init__(self, cfg: EmbedConfig, params: ParamSet):
        self.cfg = cfg
        self.params = params

    def _tensors(self):
        return {k: Tensor(v) for k, v in self.params.items()}

    def encode_motion(self, frames: np.ndarray) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float32)
        n = frames.shape[0]
        if not (2 <= n <= self.cfg.n_max):
            raise ValueError(f"frame count {n} outside [2, {self.cfg.n_max}]")
        return encode_motion_graph(self.cfg, self._tensors(), frames).data.copy()

    def decode_motion(self, z: np.ndarray, n: int) -> np.ndarray:
        if n > self.cfg.n_max:
            raise ValueError(f"cannot decode {n} > n_max={self.cfg.n_max} frames")
        z = np.asarray(z, dtype=np.float32)
        return decode_motion_graph(self.cfg, self._tensors(), Tensor(z), n).data.copy()

    def encode_text(self, caption: str) -> np.ndarray:
        base = featurize_text(caption)
        return encode_text_graph(self.cfg, self._tensors(), base).data.copy()

    def save(self, path):
        ckpt.save_checkpoint(path, "embedding", self.params, self.cfg.d_z, config=asdict(self.cfg))

    @classmethod
    def load(cls, path):
        params, meta = ckpt.load_checkpoint(path, expect_kind="embedding")
        return cls(EmbedConfig(**meta["config"]), params)


def train_embedding(dataset: Dataset, cfg: EmbedConfig = None, seed: int = None):
    """Train the autoencoder with recon + align_weight * alignment loss.

    Each minibatch pairs full clips (recon + align) with random
    subsequences (recon only).  Returns (SkillEmbedding, log dict).
    """
    cfg = cfg or EmbedConfig()
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    params = init_embedding_params(cfg, rng)
    state = AdamState.init(params)
    feats = {c.id: [featurize_text(cap) for cap in c.captions] for c in dataset.clips}
    log = {"steps": [], "loss": [], "recon": [], "align": []}
    last_good = params.copy()

    for step in range(cfg.steps):
        batch = []
        for _ in range(cfg.batch):
            clip = dataset.clips[int(rng.integers(len(dataset)))]
            cap_idx = int(rng.integers(len(clip.captions)))
            sub = random_subsequence(clip, rng, min(cfg.min_sub_len, clip.n_frames))
            batch.append((clip, feats[clip.id][cap_idx], sub))

        def loss_fn(t):
            recon_terms = []
            align_terms = []
            for clip, base, sub in batch:
                z = encode_motion_graph(cfg, t, clip.frames)
                rec = decode_motion_graph(cfg, t, z, clip.n_frames)
                diff = ad.add(rec, Tensor(-clip.frames))
                recon_terms.append(ad.tmean(ad.tsum(ad.square(diff), axis=-1)))
                zl = encode_text_graph(cfg, t, base)
                align_terms.append(ad.add(Tensor(np.float32(1.0)), ad.neg(ad.dot(z, zl))))
                # subsequence: reconstruction only
                zs = encode_motion_graph(cfg, t, sub.frames)
                recs = decode_motion_graph(cfg, t, zs, sub.n_frames)
                diffs = ad.add(recs, Tensor(-sub.frames))
                recon_terms.append(ad.tmean(ad.tsum(ad.square(diffs), axis=-1)))
            n_r = Tensor(np.float32(1.0 / len(recon_terms)))
            n_a = Tensor(np.float32(1.0 / len(align_terms)))
            recon = ad.mul(_sum_tensors(recon_terms), n_r)
            align = ad.mul(_sum_tensors(align_terms), n_a)
            return ad.add(recon, ad.mul(Tensor(np.float32(cfg.align_weight)), align)), recon, align

        try:
            value, grads, recon_v, align_v = _value_and_grad3(loss_fn, params)
        except FloatingPointError:
            return SkillEmbedding(cfg, last_good), {**log, "aborted_at": step}
        params, state = adam_step(params, grads, state, cfg.lr)
        if step % 10 == 0 or step == cfg.steps - 1:
            log["steps"].append(step)
            log["loss"].append(value)
            log["recon"].append(recon_v)
            log["align"].append(align_v)
            last_good = params.copy()

    return SkillEmbedding(cfg, params), log


def _sum_tensors(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = ad.add(acc, t)
    return acc


def _value_and_grad3(loss_fn, params):
    tensors = params.as_tensors()
    loss, recon, align = loss_fn(tensors)
    value = float(loss.data)
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite loss {value}")
    loss.backward()
    grads = ParamSet()
    for name in params:
        g = tensors[name].grad
        grads.add(name, g if g is not None else np.zeros_like(params[name]), check_finite=False)
    return value, grads, float(recon.data), float(align.data)
