"""Language-based multi-task aggregation: multiple-choice question
construction, candidate scoring, and per-tick dispatch to the selected
single-task policy and target object."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .skill_embed import featurize_text
from . import tasks as task_mod

log = logging.getLogger(__name__)

TASK_QUESTION = (
    "Bob wants to \"{command}\". This should be easy for him "
    "since he possesses the ability to {ability}."
)
OBJECT_QUESTION = (
    "Bob wants to \"{command}\". He starts by turning his attention to "
    "{appearance} nearby."
)

DEFAULT_POLICY_CARDS = (
    ("strike", "knock over a specified object"),
    ("location", "navigate to a specified destination"),
    ("facing", "orient himself to face a specified heading"),
)

COLOR_SYNONYMS = {
    "maroon": "red",
    "crimson": "red",
    "scarlet": "red",
    "lime": "green",
    "emerald": "green",
    "cobalt": "blue",
    "azure": "blue",
    "navy": "blue",
    "violet": "purple",
    "lavender": "purple",
}


@dataclass(frozen=True)
class PolicyCard:
    policy_id: str
    ability: str


@dataclass(frozen=True)
class ObjectCard:
    object_id: str
    appearance: str
    color: str = ""


def default_policy_cards():
    return [PolicyCard(pid, ability) for pid, ability in DEFAULT_POLICY_CARDS]


def object_cards_for_world(world):
    return [
        ObjectCard(o.id, f"the {o.color} object", color=o.color) for o in world.objects
    ]


def load_cards(path):
    """Card config file: {"policies":[{"id","ability"}],"objects":[...]}"""
    with open(path) as f:
        doc = json.load(f)
    policies = [PolicyCard(p["id"], p["ability"]) for p in doc.get("policies", [])]
    objects = [
        ObjectCard(o["id"], o["appearance"], o.get("color", "")) for o in doc.get("objects", [])
    ]
    return policies, objects


def build_task_question(command: str, policy_cards):
    if not command.strip():
        raise ValueError("empty command")
    if not policy_cards:
        raise ValueError("need at least one policy card")
    return [TASK_QUESTION.format(command=command, ability=c.ability) for c in policy_cards]


def build_object_question(command: str, object_cards):
    if not command.strip():
        raise ValueError("empty command")
    if not object_cards:
        raise ValueError("need at least one object card")
    return [OBJECT_QUESTION.format(command=command, appearance=c.appearance) for c in object_cards]


class BaselineCosineScorer:
    """Scores each choice by hashed-feature cosine between the command and
    the card's ability/appearance phrase.

    A small color-synonym lexicon is applied to the command for object
    questions only, mirroring common color paraphrases.
    """

    name = "baseline-cosine"

    def __init__(self, use_color_synonyms=True):
        self.use_color_synonyms = use_color_synonyms

    def score(self, command: str, phrases, kind="task"):
        text = command
        if kind == "object" and self.use_color_synonyms:
            words = [COLOR_SYNONYMS.get(w.lower(), w) for w in text.split()]
            text = " ".join(words)
        cmd_vec = featurize_text(text)
        return [float(cmd_vec @ featurize_text(p)) for p in phrases]


class ExternalScorer:
    """HTTP adapter for a real QA model.

    POSTs {"prompt": str, "candidates": [str]} and expects
    {"scores": [float]}; any failure falls back to the baseline scorer
    with a logged warning.
    """

    name = "external"

    def __init__(self, endpoint, timeout=2.0, fallback=None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.fallback = fallback or BaselineCosineScorer()

    def score(self, command: str, phrases, kind="task"):
        import urllib.request

        payload = json.dumps({"prompt": command, "candidates": list(phrases)}).encode()
        try:
            req = urllib.request.Request(
                self.endpoint, data=payload, headers={"Content-Type": "application/json"}
            )
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode())
            scores = doc["scores"]
            if not isinstance(scores, list) or len(scores) != len(phrases):
                raise ValueError(f"scorer returned {len(scores)} scores for {len(phrases)} candidates")
            return [float(s) for s in scores]
        except Exception as e:  # noqa: BLE001 - fallback contract
            log.warning("external scorer failed (%s); using %s", e, self.fallback.name)
            return self.fallback.score(command, phrases, kind=kind)


@dataclass
class Selection:
    policy_id: str
    object_id: str
    task_scores: list
    object_scores: list
    task_candidates: list
    object_candidates: list


def select(command: str, policy_cards, object_cards, scorer) -> Selection:
    """Answer both multiple-choice questions; argmax with index tie-break."""
    task_candidates = build_task_question(command, policy_cards)
    object_candidates = build_object_question(command, object_cards)
    task_scores = scorer.score(command, [c.ability for c in policy_cards], kind="task")
    object_scores = scorer.score(command, [c.appearance for c in object_cards], kind="object")
    pi = int(np.argmax(task_scores))
    oi = int(np.argmax(object_scores))
    return Selection(
        policy_id=policy_cards[pi].policy_id,
        object_id=object_cards[oi].object_id,
        task_scores=list(task_scores),
        object_scores=list(object_scores),
        task_candidates=task_candidates,
        object_candidates=object_candidates,
    )


def goal_for_selection(world, selection: Selection):
    if selection.policy_id == "strike":
        return task_mod.StrikeGoal(object_id=selection.object_id)
    obj = world.object_by_id(selection.object_id)
    if selection.policy_id == "location":
        return task_mod.LocationGoal(target=obj.p.copy(), object_id=obj.id)
    if selection.policy_id == "facing":
        offset = obj.p - world.character.p
        n = np.linalg.norm(offset)
        if n < 1e-9:
            raise ValueError(f"cannot face object {obj.id}: character is on top of it")
        return task_mod.FacingGoal(direction=offset / n)
    raise KeyError(f"no goal construction for policy {selection.policy_id!r}")


class Aggregator:
    """Per-tick multi-task dispatch.

    Selection is deterministic in the command strings, so the result is
    cached until either command changes; this is equivalent to
    re-selecting every tick.
    """

    def __init__(self, policies, embedding, scorer=None, policy_cards=None):
        self.policies = policies  # {policy_id: GaussianPolicy}
        self.embedding = embedding
        self.scorer = scorer or BaselineCosineScorer()
        self.policy_cards = policy_cards or [
            c for c in default_policy_cards() if c.policy_id in policies
        ]
        self._cache_key = None
        self._selection = None
        self._z = None
        self._skill_cache_key = None

    def current_selection(self):
        return self._selection

    def step(self, world, skill_command: str, task_command: str, rng=None, deterministic=True):
        """One aggregation tick: returns (action, Selection, goal)."""
        from . import sim
        from .ppo import GaussianPolicy  # noqa: F401 - typing aid

        if skill_command != self._skill_cache_key:
            self._z = self.embedding.encode_text(skill_command)
            self._skill_cache_key = skill_command
        object_cards = object_cards_for_world(world)
        cache_key = (task_command, tuple(c.object_id for c in object_cards))
        if cache_key != self._cache_key:
            self._selection = select(task_command, self.policy_cards, object_cards, self.scorer)
            self._cache_key = cache_key
        sel = self._selection
        policy = self.policies.get(sel.policy_id)
        if policy is None:
            raise KeyError(f"selected policy {sel.policy_id!r} is not loaded")
        goal = goal_for_selection(world, sel)
        obs = sim.observe(world).reshape(1, -1)
        g = task_mod.goal_features(world, goal).reshape(1, -1)
        z = np.asarray(self._z, dtype=np.float32).reshape(1, -1)
        if deterministic or rng is None:
            action = policy.mode(obs, g, z)[0]
        else:
            action, _, _, _ = policy.sample(obs, g, z, rng)
            action = action[0]
        return action, sel, goal
