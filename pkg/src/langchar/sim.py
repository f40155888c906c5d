"""Deterministic 2-D physics world: planar character with speed, heading,
body height and arm drives, plus tippable block objects.

The control tick is 1/30 s; each tick runs 4 semi-implicit Euler substeps
at 1/120 s.  Observations are local-frame feature vectors matching the
motion-clip pose layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .motion_data import POSE_DIM, H_MIN, H_MAX

DT_CONTROL = 1.0 / 30.0
N_SUBSTEPS = 4
DT_SIM = DT_CONTROL / N_SUBSTEPS

V_MAX = 5.0
OMEGA_MAX = 6.0
DRAG = 0.5  # linear drag, 1/s
ACCEL_SCALE = 4.0  # m/s^2 at full forward command
OMEGA_ACCEL = 12.0  # rad/s^2 at full turn command
OMEGA_DRAG = 2.0  # 1/s
H_RATE_MAX = 1.0  # m/s
ARM_RATE_MAX = 3.0  # 1/s

CHAR_RADIUS = 0.4
APPROACH_MIN = 0.5  # m/s needed to disturb an object
K_IMPACT = 0.8  # rad/s of tilt rate per m/s of approach speed
TILT_RELAX = 0.5  # rad/s recovery while upright
TILT_RATE_DECAY = 0.5  # 1/s exponential decay of tilt rate
TOPPLE_COS = 0.3


@dataclass
class CharacterState:
    p: np.ndarray  # world position (2,)
    theta: float = 0.0
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))  # world velocity
    omega: float = 0.0
    h: float = 0.9
    h_rate: float = 0.0
    arm: float = 0.0
    arm_rate: float = 0.0

    def copy(self):
        return replace(self, p=self.p.copy(), v=self.v.copy())

    def heading(self):
        return np.array([np.cos(self.theta), np.sin(self.theta)])


@dataclass
class SimObject:
    id: str
    color: str
    p: np.ndarray
    radius: float = 0.5
    tilt: float = 0.0  # rad from vertical
    tilt_rate: float = 0.0
    toppled: bool = False
    in_contact: bool = False

    def copy(self):
        return replace(self, p=self.p.copy())

    @property
    def updot(self):
        return float(np.cos(self.tilt))

    @property
    def v(self):
        # Blocks do not translate in this model.
        return np.zeros(2)


@dataclass
class WorldState:
    character: CharacterState
    objects: list
    t: float = 0.0

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate object ids")

    def copy(self):
        return WorldState(self.character.copy(), [o.copy() for o in self.objects], self.t)

    def object_by_id(self, oid):
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)


class SimFault(RuntimeError):
    def __init__(self, msg, snapshot):
        super().__init__(msg)
        self.snapshot = snapshot


def _clamp_action(action):
    a = np.asarray(action, dtype=np.float64).reshape(4)
    return np.clip(a, -1.0, 1.0)


def step(world: WorldState, action, n_substeps: int = N_SUBSTEPS) -> WorldState:
    """Advance one control tick (1/30 s) under a 4-component drive action:
    [forward accel, turn rate, height rate, arm rate], each in [-1, 1]."""
    a = _clamp_action(action)
    w = world.copy()
    c = w.character
    dt = DT_CONTROL / n_substeps

    for _ in range(n_substeps):
        # character dynamics (semi-implicit Euler)
        fwd = c.heading()
        accel = a[0] * ACCEL_SCALE * fwd - DRAG * c.v
        c.v = c.v + accel * dt
        speed = np.linalg.norm(c.v)
        if speed > V_MAX:
            c.v *= V_MAX / speed
        c.omega += (a[1] * OMEGA_ACCEL - OMEGA_DRAG * c.omega) * dt
        c.omega = float(np.clip(c.omega, -OMEGA_MAX, OMEGA_MAX))
        c.theta = float((c.theta + c.omega * dt + np.pi) % (2 * np.pi) - np.pi)
        c.p = c.p + c.v * dt

        new_h = float(np.clip(c.h + a[2] * H_RATE_MAX * dt, H_MIN, H_MAX))
        c.h_rate = (new_h - c.h) / dt
        c.h = new_h
        new_arm = float(np.clip(c.arm + a[3] * ARM_RATE_MAX * dt, -1.0, 1.0))
        c.arm_rate = (new_arm - c.arm) / dt
        c.arm = new_arm

        # object contact and tilt dynamics
        for obj in w.objects:
            offset = obj.p - c.p
            dist = float(np.linalg.norm(offset))
            touching = dist < (obj.radius + CHAR_RADIUS)
            if touching and dist > 1e-9:
                approach = float(c.v @ (offset / dist))
            else:
                approach = 0.0
            if touching and not obj.in_contact and approach > APPROACH_MIN:
                obj.tilt_rate += K_IMPACT * approach
            obj.in_contact = touching

            if not obj.toppled:
                obj.tilt += obj.tilt_rate * dt
                obj.tilt_rate *= np.exp(-TILT_RATE_DECAY * dt)
                if np.cos(obj.tilt) < TOPPLE_COS:
                    obj.toppled = True
                    obj.tilt_rate = 0.0
                else:
                    obj.tilt = max(0.0, obj.tilt - TILT_RELAX * dt)
            else:
                obj.tilt = min(np.pi / 2, obj.tilt + 1.0 * dt)

        w.t += dt

    if not (np.all(np.isfinite(c.p)) and np.all(np.isfinite(c.v)) and np.isfinite(c.theta)):
        raise SimFault("non-finite character state", w)
    return w


def observe(world: WorldState) -> np.ndarray:
    """Local-frame features [h, v_fwd, v_lat, omega, h_rate, arm, arm_rate];
    world position and heading are deliberately excluded."""
    c = world.character
    fwd = c.heading()
    lat = np.array([-fwd[1], fwd[0]])
    return np.array(
        [c.h, c.v @ fwd, c.v @ lat, c.omega, c.h_rate, c.arm, c.arm_rate],
        dtype=np.float32,
    )


def local_frame(world: WorldState, vec_world: np.ndarray) -> np.ndarray:
    """Rotate a world-frame 2-vector into the character's local frame."""
    c = world.character
    fwd = c.heading()
    lat = np.array([-fwd[1], fwd[0]])
    return np.array([vec_world @ fwd, vec_world @ lat])


@dataclass
class EnvConfig:
    n_objects: int = 4
    object_colors: tuple = ("red", "green", "blue", "purple")
    object_radius: float = 0.5
    annulus: tuple = (3.0, 8.0)
    randomize_height: bool = False


def reset(config: EnvConfig, rng: np.random.Generator) -> WorldState:
    """Character at origin with random heading; upright objects placed
    without overlap in an annulus around it."""
    theta = float(rng.uniform(-np.pi, np.pi))
    h = float(rng.uniform(0.5, 1.1)) if config.randomize_height else 0.9
    character = CharacterState(p=np.zeros(2), theta=theta, h=h)
    objects = []
    for i in range(config.n_objects):
        color = config.object_colors[i % len(config.object_colors)]
        for attempt in range(1000):
            r = float(rng.uniform(*config.annulus))
            ang = float(rng.uniform(-np.pi, np.pi))
            p = np.array([r * np.cos(ang), r * np.sin(ang)])
            ok = all(
                np.linalg.norm(p - o.p) >= (config.object_radius + o.radius)
                for o in objects
            )
            if ok:
                objects.append(
                    SimObject(id=f"{color}_{i}", color=color, p=p, radius=config.object_radius)
                )
                break
        else:
            raise RuntimeError("could not place objects without overlap in 1000 attempts")
    return WorldState(character=character, objects=objects)
