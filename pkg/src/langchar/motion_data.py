"""Captioned motion clips: schema, synthetic scripted-skill corpus,
serialization, and the sampling distributions used by the discriminator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FPS = 30
POSE_DIM = 7
POSE_FIELDS = ("h", "v_fwd", "v_lat", "omega", "h_rate", "arm", "arm_rate")
H_MIN, H_MAX = 0.3, 1.2


@dataclass(frozen=True)
class Pose:
    """Single frame of local-frame pose features."""

    h: float
    v_fwd: float
    v_lat: float
    omega: float
    h_rate: float
    arm: float
    arm_rate: float

    def as_array(self):
        return np.array(
            [self.h, self.v_fwd, self.v_lat, self.omega, self.h_rate, self.arm, self.arm_rate],
            dtype=np.float32,
        )

    def validate(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite pose values")
        if not (H_MIN <= self.h <= H_MAX):
            raise ValueError(f"body height {self.h} outside [{H_MIN}, {H_MAX}]")


@dataclass
class CaptionedClip:
    """Fixed-rate pose-feature sequence with 1-4 captions.

    frames is an (n, 7) float32 array in POSE_FIELDS order.
    """

    id: str
    frames: np.ndarray
    captions: list
    fps: int = FPS
    subsequence: bool = False

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[1] != POSE_DIM:
            raise ValueError(f"frames must be (n, {POSE_DIM})")
        if self.frames.shape[0] < 2:
            raise ValueError("clip needs at least 2 frames")
        if not (1 <= len(self.captions) <= 4):
            raise ValueError(f"clip {self.id!r}: need 1-4 captions, got {len(self.captions)}")
        if any(not c.strip() for c in self.captions):
            raise ValueError(f"clip {self.id!r}: empty caption")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError(f"clip {self.id!r}: non-finite frames")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def duration(self):
        return self.n_frames / self.fps

    def __eq__(self, other):
        return (
            isinstance(other, CaptionedClip)
            and self.id == other.id
            and self.fps == other.fps
            and self.subsequence == other.subsequence
            and self.captions == other.captions
            and self.frames.shape == other.frames.shape
            and np.array_equal(self.frames, other.frames)
        )


@dataclass
class Dataset:
    clips: list
    version: int = 1

    def __post_init__(self):
        ids = [c.id for c in self.clips]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate clip ids")

    def __len__(self):
        return len(self.clips)

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and self.version == other.version
            and self.clips == other.clips
        )

    def by_id(self, clip_id):
        for c in self.clips:
            if c.id == clip_id:
                return c
        raise KeyError(clip_id)


# -- synthetic corpus ---------------------------------------------------

STAND_H = 0.9


def _triangle(t, amplitude, slope, phase=0.0):
    """Triangle wave in [-amplitude, amplitude] with given absolute slope.

    Returns (value, rate)."""
    if amplitude == 0 or slope == 0:
        return np.zeros_like(t), np.zeros_like(t)
    period = 4 * amplitude / slope
    x = (t / period + phase) % 1.0
    value = np.where(x < 0.5, 4 * x - 1, 3 - 4 * x) * amplitude
    rate = np.where(x < 0.5, slope, -slope)
    return value, rate


def _skill_frames(skill, n, seed_jitter, phase):
    """Feature trajectory for one scripted skill; returns (n, 7)."""
    t = np.arange(n) / FPS
    h = np.full(n, STAND_H)
    v_fwd = np.zeros(n)
    v_lat = np.zeros(n)
    omega = np.zeros(n)
    h_rate = np.zeros(n)
    arm = np.zeros(n)
    arm_rate = np.zeros(n)
    j = 1.0 + seed_jitter  # small per-clip speed variation

    if skill == "walk":
        v_fwd[:] = 1.0 * j
        arm, arm_rate = _triangle(t, 0.3, 0.6, phase)
    elif skill == "sprint":
        v_fwd[:] = 3.5 * j
        arm, arm_rate = _triangle(t, 0.8, 2.4, phase)
    elif skill == "crouch_walk":
        v_fwd[:] = 0.8 * j
        h[:] = 0.5
        arm, arm_rate = _triangle(t, 0.2, 0.4, phase)
    elif skill == "walk_backward":
        v_fwd[:] = -1.0 * j
        arm, arm_rate = _triangle(t, 0.3, 0.6, phase)
    elif skill == "turn_left":
        omega[:] = 1.2 * j
    elif skill == "turn_right":
        omega[:] = -1.2 * j
    elif skill == "zigzag":
        v_fwd[:] = 1.5 * j
        om, _ = _triangle(t, 1.0, 4.0, phase)
        omega = om
        v_lat, _ = _triangle(t, 0.2, 0.8, phase + 0.25)
    elif skill == "idle":
        arm, arm_rate = _triangle(t, 0.02, 0.04, phase)
    else:
        raise ValueError(f"unknown skill tag {skill!r}")

    return np.stack([h, v_fwd, v_lat, omega, h_rate, arm, arm_rate], axis=1).astype(np.float32)


SKILL_CAPTIONS = {
    "walk": ["walk forward", "forward walk", "stroll ahead at an easy pace"],
    "sprint": [
        "sprint forward while swinging arms",
        "run forward as fast as possible",
        "sprint forwards while swinging arms",
        "dash ahead",
    ],
    "crouch_walk": ["crouching walk forward", "walk forward while crouching low", "creep ahead staying low"],
    "walk_backward": ["walk backward", "walk backwards slowly", "back up while facing forward"],
    "turn_left": ["turn left in place", "rotate to the left while standing still", "spin counterclockwise in place"],
    "turn_right": ["turn right in place", "rotate to the right while standing still", "spin clockwise in place"],
    "zigzag": ["zigzag forward", "move ahead weaving side to side", "run a slalom path forward"],
    "idle": ["stand still", "idle in place", "do not move"],
}

DEFAULT_SKILLS = tuple(SKILL_CAPTIONS)


@dataclass
class CorpusConfig:
    skills: tuple = DEFAULT_SKILLS
    clips_per_skill: int = 2
    clip_seconds: float = 10.0

    def __post_init__(self):
        if len(self.skills) < 6:
            raise ValueError("config must list at least 6 scripted skills")


def generate_synthetic_dataset(config: CorpusConfig = None, seed: int = 0) -> Dataset:
    """Deterministic scripted-skill corpus standing in for mocap data."""
    config = config or CorpusConfig()
    rng = np.random.default_rng(seed)
    n = int(round(config.clip_seconds * FPS))
    clips = []
    for skill in config.skills:
        caps = SKILL_CAPTIONS.get(skill)
        if caps is None:
            raise ValueError(f"unknown skill tag {skill!r}")
        for k in range(config.clips_per_skill):
            jitter = float(rng.uniform(-0.04, 0.04))
            phase = float(rng.uniform(0, 1))
            n_caps = 1 + int(rng.integers(0, min(4, len(caps))))
            clips.append(
                CaptionedClip(
                    id=f"{skill}_{k}",
                    frames=_skill_frames(skill, n, jitter, phase),
                    captions=list(caps[:n_caps]),
                )
            )
    return Dataset(clips=clips)


# -- serialization ------------------------------------------------------


def save_dataset(dataset: Dataset, path):
    doc = {
        "version": dataset.version,
        "fps": FPS,
        "clips": [
            {
                "id": c.id,
                "captions": list(c.captions),
                "subsequence": c.subsequence,
                "frames": [[float(x) for x in row] for row in c.frames],
            }
            for c in dataset.clips
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, separators=(",", ":"))


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"dataset parse error at byte {e.pos}: {e.msg}") from e
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise ValueError("dataset schema: expected version 1 document")
    if doc.get("fps") != FPS:
        raise ValueError(f"dataset schema: fps must be {FPS}")
    clips = []
    for entry in doc.get("clips", []):
        cid = entry.get("id", "<missing id>")
        for fld in ("id", "captions", "frames"):
            if fld not in entry:
                raise ValueError(f"dataset schema: clip {cid!r} missing field {fld!r}")
        frames = np.asarray(entry["frames"], dtype=np.float32)
        try:
            clips.append(
                CaptionedClip(
                    id=entry["id"],
                    frames=frames,
                    captions=list(entry["captions"]),
                    subsequence=bool(entry.get("subsequence", False)),
                )
            )
        except ValueError as e:
            raise ValueError(f"dataset schema: clip {cid!r}: {e}") from e
    return Dataset(clips=clips, version=doc["version"])


# -- sampling -----------------------------------------------------------


def sample_clip(dataset: Dataset, rng: np.random.Generator) -> CaptionedClip:
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return dataset.clips[int(rng.integers(len(dataset)))]


def sample_transition(clip: CaptionedClip, rng: np.random.Generator):
    """Consecutive frame pair (q_t, q_{t+1}) with t uniform."""
    if clip.n_frames < 2:
        raise ValueError("clip needs at least 2 frames")
    t = int(rng.integers(clip.n_frames - 1))
    return clip.frames[t], clip.frames[t + 1]


def sample_transition_batch(clip: CaptionedClip, rng: np.random.Generator, batch):
    idx = rng.integers(clip.n_frames - 1, size=batch)
    return clip.frames[idx], clip.frames[idx + 1]


def random_subsequence(clip: CaptionedClip, rng: np.random.Generator, min_len: int) -> CaptionedClip:
    """Contiguous slice with length uniform in [min_len, n]; flagged so it
    only feeds the reconstruction loss during embedding training."""
    n = clip.n_frames
    if min_len > n:
        raise ValueError(f"min_len {min_len} > clip length {n}")
    length = int(rng.integers(min_len, n + 1))
    start = int(rng.integers(n - length + 1))
    return CaptionedClip(
        id=f"{clip.id}[{start}:{start + length}]",
        frames=clip.frames[start : start + length].copy(),
        captions=list(clip.captions),
        subsequence=True,
    )
