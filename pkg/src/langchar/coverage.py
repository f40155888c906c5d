"""Quantitative evaluation: thresholded coverage curves, latent
interpolation sweeps, and conditioning/discriminator ablations."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .motion_data import Dataset
from . import ppo as ppo_mod
from .skill_embed import slerp


@dataclass
class CoverageConfig:
    epsilons: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 3.0, 31))
    rollout_ticks: int = 300
    seed: int = 0
    deterministic: bool = False  # roll out with the policy mode instead of sampling

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=np.float64)
        if np.any(eps < 0) or np.any(np.diff(eps) < 0):
            raise ValueError("epsilon grid must be non-negative and ascending")
        self.epsilons = eps


def coverage(trajectory: np.ndarray, clip_states: np.ndarray, eps: float) -> float:
    """Fraction of clip states within eps of some trajectory state."""
    trajectory = np.asarray(trajectory, dtype=np.float64)
    clip_states = np.asarray(clip_states, dtype=np.float64)
    if trajectory.size == 0 or clip_states.size == 0:
        raise ValueError("empty state sequence")
    d = _min_dists(trajectory, clip_states)
    return float(np.mean(d <= eps))


def coverage_multi(trajectory, clip_states, epsilons):
    """Coverage at every epsilon in one pass."""
    d = _min_dists(np.asarray(trajectory, np.float64), np.asarray(clip_states, np.float64))
    return np.array([np.mean(d <= e) for e in epsilons])


def _min_dists(trajectory, clip_states):
    # (n_clip, n_traj) pairwise distances, chunked to bound memory
    out = np.empty(clip_states.shape[0])
    chunk = 1024
    for i in range(0, clip_states.shape[0], chunk):
        diff = clip_states[i : i + chunk, None, :] - trajectory[None, :, :]
        out[i : i + chunk] = np.sqrt((diff * diff).sum(-1)).min(axis=1)
    return out


def coverage_naive(trajectory, clip_states, eps):
    """Double-loop oracle for the coverage metric."""
    n = 0
    hit = 0
    for s_hat in clip_states:
        n += 1
        best = min(float(np.linalg.norm(np.asarray(s_hat) - np.asarray(s))) for s in trajectory)
        if best <= eps:
            hit += 1
    return hit / n


def coverage_curve(policy, latent_provider, dataset: Dataset, cfg: CoverageConfig = None,
                   env_config=None):
    """Caption-then-clip averaged coverage per epsilon.

    For every (clip, caption): roll out with the caption's latent and
    compute coverage over the epsilon grid.  Returns dict with
    "epsilons", "coverage" (mean curve), and "per_clip" detail.
    """
    cfg = cfg or CoverageConfig()
    per_clip = {}
    skipped = []
    for clip in dataset.clips:
        caption_curves = []
        for caption in clip.captions:
            z = latent_provider.caption_latent(caption)
            try:
                traj, _ = ppo_mod.rollout(
                    policy, z, n_ticks=cfg.rollout_ticks, env_config=env_config,
                    seed=cfg.seed, deterministic=cfg.deterministic,
                )
            except Exception as e:  # noqa: BLE001 - reported, not fatal
                skipped.append((clip.id, caption, str(e)))
                continue
            caption_curves.append(coverage_multi(traj, clip.frames, cfg.epsilons))
        if caption_curves:
            per_clip[clip.id] = np.mean(caption_curves, axis=0)
    mean_curve = np.mean(list(per_clip.values()), axis=0)
    return {
        "epsilons": cfg.epsilons,
        "coverage": mean_curve,
        "per_clip": per_clip,
        "skipped": skipped,
    }


def coverage_at(curve, eps):
    i = int(np.argmin(np.abs(curve["epsilons"] - eps)))
    return float(curve["coverage"][i])


def write_coverage_csv(curve, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epsilon", "coverage"])
        for e, c in zip(curve["epsilons"], curve["coverage"]):
            w.writerow([f"{e:.6g}", f"{c:.6g}"])


def interpolation_sweep(policy, latent_provider, caption_a, caption_b, k=9,
                        rollout_ticks=300, env_config=None, seed=0):
    """Statistics of rollouts along the slerp arc between two captions."""
    z1 = latent_provider.caption_latent(caption_a)
    z2 = latent_provider.caption_latent(caption_b)
    rows = []
    for i in range(k):
        t = i / (k - 1)
        z = slerp(z1, z2, t) if 0 < t < 1 else (z1 if t == 0 else z2)
        traj, _ = ppo_mod.rollout(policy, z, n_ticks=rollout_ticks,
                                  env_config=env_config, seed=seed)
        speed = np.abs(traj[:, 1])  # |v_fwd|
        rows.append({"t": t, "mean_speed": float(speed.mean()),
                     "mean_height": float(traj[:, 0].mean())})
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "mean_speed", "mean_height"])
        for r in rows:
            w.writerow([f"{r['t']:.6g}", f"{r['mean_speed']:.6g}", f"{r['mean_height']:.6g}"])


def _average_ranks(xs):
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(len(xs), dtype=np.float64)
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j)  # ties share their mean rank
        i = j + 1
    return ranks


def spearman(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    rx = _average_ranks(xs)
    ry = _average_ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    return float((rx * ry).sum() / denom) if denom > 0 else 0.0


def baseline_comparison(dataset: Dataset, providers: dict, ppo_configs: dict,
                        coverage_config: CoverageConfig = None, env_config=None,
                        progress=None):
    """Train one no-task policy per conditioning variant under an identical
    budget and compare coverage curves.

    providers maps variant name -> LatentProvider; ppo_configs maps the same
    names -> PpoConfig.  Budgets (envs, rollout length, epochs) must match
    across variants, otherwise the comparison is rejected as unfair.
    Returns {variant: {"curve", "at_1.0"}}.
    """
    if set(providers) != set(ppo_configs):
        raise ValueError("providers and ppo_configs must list the same variants")
    budgets = {
        name: (cfg.n_envs, cfg.rollout_len, cfg.epochs)
        for name, cfg in ppo_configs.items()
    }
    if len(set(budgets.values())) > 1:
        raise ValueError(f"training budget mismatch between variants: {budgets}")
    results = {}
    for name, provider in providers.items():
        trainer = ppo_mod.PpoTrainer("none", dataset, provider, ppo_configs[name],
                                     env_config=env_config)
        policy = trainer.train(progress=progress)
        curve = coverage_curve(policy, provider, dataset, coverage_config,
                               env_config=env_config)
        results[name] = {"curve": curve, "at_1.0": coverage_at(curve, 1.0)}
    return results


def min_over_skills(curve, dataset: Dataset, eps):
    """Worst per-skill coverage at one epsilon (mode-collapse indicator)."""
    i = int(np.argmin(np.abs(curve["epsilons"] - eps)))
    by_skill = {}
    for clip_id, c in curve["per_clip"].items():
        skill = clip_id.rsplit("_", 1)[0]
        by_skill.setdefault(skill, []).append(c[i])
    per_skill = {s: float(np.mean(v)) for s, v in by_skill.items()}
    return min(per_skill.values()), per_skill


def write_summary_json(path, config, extra):
    doc = {"config": config, **extra}
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))
