"""Facing / Location / Strike goals: features, rewards, termination,
and goal sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import WorldState, local_frame, TOPPLE_COS

GOAL_DIM = 6
EPISODE_TICKS = 300

DELTA_POS = 2.0
DELTA_VEL = 0.5
FACING_CAP = 0.5
STRIKE_SATURATION = 1.4


@dataclass(frozen=True)
class FacingGoal:
    direction: np.ndarray  # unit 2-vector, world frame

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("facing direction must be unit length")
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class LocationGoal:
    target: np.ndarray  # world position (2,)
    object_id: str  # physical marker block

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64))


@dataclass(frozen=True)
class StrikeGoal:
    object_id: str


@dataclass(frozen=True)
class TaskSpec:
    name: str  # facing | location | strike
    reward_target: float  # adaptive-weight target; facing uses fixed weight
    episode_ticks: int = EPISODE_TICKS
    adaptive_weight: bool = True


TASK_SPECS = {
    "facing": TaskSpec("facing", reward_target=1.0, adaptive_weight=False),
    "location": TaskSpec("location", reward_target=0.15),
    "strike": TaskSpec("strike", reward_target=0.3),
}


def goal_features(world: WorldState, goal) -> np.ndarray:
    """Fixed 6-slot local-frame goal vector, zero-padded per variant."""
    g = np.zeros(GOAL_DIM, dtype=np.float32)
    if goal is None:
        return g
    if isinstance(goal, FacingGoal):
        g[0:2] = local_frame(world, goal.direction)
    elif isinstance(goal, LocationGoal):
        g[0:2] = local_frame(world, goal.target - world.character.p)
    elif isinstance(goal, StrikeGoal):
        obj = world.object_by_id(goal.object_id)
        g[0:2] = local_frame(world, obj.p - world.character.p)
        g[2:4] = local_frame(world, obj.v)
        g[4] = obj.updot
        g[5] = obj.tilt_rate
    else:
        raise TypeError(f"unknown goal {goal!r}")
    return g


def reward_facing(world: WorldState, goal: FacingGoal) -> float:
    """Heading alignment, saturated inside an optimal cone."""
    d = world.character.heading()
    return float(min(d @ goal.direction, FACING_CAP))


def _pos_vel_rewards(world: WorldState, target: np.ndarray):
    c = world.character
    offset = np.asarray(target, dtype=np.float64) - c.p
    dist = float(np.linalg.norm(offset))
    r_pos = float(np.exp(-0.25 * dist * dist))
    if dist > 1e-9:
        toward = offset / dist
        v_proj = float(c.v @ toward)  # signed approach speed
        v_perp = abs(float(c.v @ np.array([-toward[1], toward[0]])))
    else:
        v_proj, v_perp = float(np.linalg.norm(c.v)), 0.0
    r_vel = float(np.exp(-0.25 * (max(DELTA_VEL - v_proj, 0.0) + 0.1 * v_perp)))
    return dist, r_pos, r_vel


def reward_location(world: WorldState, goal: LocationGoal) -> float:
    dist, r_pos, r_vel = _pos_vel_rewards(world, goal.target)
    if dist <= DELTA_POS:
        return 0.8
    return 0.2 * r_pos + 0.8 * r_vel


def reward_strike(world: WorldState, goal: StrikeGoal) -> float:
    obj = world.object_by_id(goal.object_id)
    if obj.updot < TOPPLE_COS:
        return STRIKE_SATURATION
    _, r_pos, r_vel = _pos_vel_rewards(world, obj.p)
    r_knock = 1.0 - obj.updot
    return 0.2 * r_pos + 0.8 * r_vel + 0.8 * r_knock


def task_reward(world: WorldState, goal) -> float:
    if goal is None:
        return 0.0
    if isinstance(goal, FacingGoal):
        return reward_facing(world, goal)
    if isinstance(goal, LocationGoal):
        return reward_location(world, goal)
    if isinstance(goal, StrikeGoal):
        return reward_strike(world, goal)
    raise TypeError(f"unknown goal {goal!r}")


def check_termination(world: WorldState, task: str, goal, tick: int):
    """Returns None to continue, else a human-readable reason string."""
    spec = TASK_SPECS.get(task) if task else None
    horizon = spec.episode_ticks if spec else EPISODE_TICKS
    if tick >= horizon:
        return "horizon"
    if isinstance(goal, LocationGoal):
        # running the marker block over must not be a shortcut
        if world.object_by_id(goal.object_id).updot < TOPPLE_COS:
            return "block knocked over"
    return None


def sample_goal(task: str, world: WorldState, rng: np.random.Generator):
    if task == "facing":
        ang = float(rng.uniform(-np.pi, np.pi))
        return FacingGoal(direction=np.array([np.cos(ang), np.sin(ang)]))
    if task in ("location", "strike"):
        if not world.objects:
            raise ValueError(f"{task} goal needs at least one object")
        obj = world.objects[int(rng.integers(len(world.objects)))]
        if task == "location":
            return LocationGoal(target=obj.p.copy(), object_id=obj.id)
        return StrikeGoal(object_id=obj.id)
    if task in (None, "none"):
        return None
    raise ValueError(f"unknown task {task!r}")
