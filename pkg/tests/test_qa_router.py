"""Multiple-choice question construction, candidate scoring, selection,
and per-tick dispatch."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from langchar import qa_router as qa
from langchar import sim
from langchar import tasks as task_mod
from langchar import ppo
from langchar.skill_embed import EmbedConfig, SkillEmbedding, init_embedding_params


def make_world():
    c = sim.CharacterState(p=np.zeros(2), theta=0.0)
    objs = [
        sim.SimObject(id=f"{col}_{i}", color=col, p=np.array([2.0 + i, float(i)]))
        for i, col in enumerate(["red", "green", "blue", "purple"])
    ]
    return sim.WorldState(character=c, objects=objs)


CANONICAL = [
    (f"{verb} the {color} block", task, color)
    for verb, task in [
        ("knock over", "strike"),
        ("walk to", "location"),
        ("face", "facing"),
    ]
    for color in ["red", "green", "blue", "purple"]
]


# -- question construction ----------------------------------------------


def test_task_question_text():
    cards = qa.default_policy_cards()
    qs = qa.build_task_question("knock over the red block", cards)
    assert qs[0] == (
        'Bob wants to "knock over the red block". This should be easy for him '
        "since he possesses the ability to knock over a specified object."
    )
    assert len(qs) == 3


def test_object_question_text():
    cards = qa.object_cards_for_world(make_world())
    qs = qa.build_object_question("walk to the red block", cards)
    assert qs[0] == (
        'Bob wants to "walk to the red block". He starts by turning his '
        "attention to the red object nearby."
    )
    assert len(qs) == 4


def test_question_builders_reject_bad_input():
    with pytest.raises(ValueError):
        qa.build_task_question(" ", qa.default_policy_cards())
    with pytest.raises(ValueError):
        qa.build_task_question("x", [])
    with pytest.raises(ValueError):
        qa.build_object_question("x", [])


# -- baseline scorer and selection --------------------------------------


def test_canonical_commands_routed_correctly():
    world = make_world()
    pol_cards = qa.default_policy_cards()
    obj_cards = qa.object_cards_for_world(world)
    scorer = qa.BaselineCosineScorer()
    for command, task, color in CANONICAL:
        sel = qa.select(command, pol_cards, obj_cards, scorer)
        assert sel.policy_id == task, command
        assert sel.object_id.startswith(color), command


def test_color_synonym_routing():
    world = make_world()
    pol_cards = qa.default_policy_cards()
    obj_cards = qa.object_cards_for_world(world)
    scorer = qa.BaselineCosineScorer()
    for command, task, color in [
        ("knock over the cobalt block", "strike", "blue"),
        ("walk to the maroon block", "location", "red"),
        ("face the lime block", "facing", "green"),
    ]:
        sel = qa.select(command, pol_cards, obj_cards, scorer)
        assert sel.policy_id == task and sel.object_id.startswith(color), command


def test_synonyms_apply_to_object_question_only():
    scorer = qa.BaselineCosineScorer()
    a = scorer.score("go to the maroon block", ["the red object"], kind="object")
    b = scorer.score("go to the red block", ["the red object"], kind="object")
    assert a == b
    c = scorer.score("go to the maroon block", ["the red object"], kind="task")
    assert c != a


def test_selection_argmax_tie_breaks_to_first_index():
    class ConstScorer:
        name = "const"

        def score(self, command, phrases, kind="task"):
            return [0.5] * len(phrases)

    world = make_world()
    sel = qa.select("anything", qa.default_policy_cards(),
                    qa.object_cards_for_world(world), ConstScorer())
    assert sel.policy_id == qa.default_policy_cards()[0].policy_id
    assert sel.object_id == world.objects[0].id


def test_selection_records_scores_and_candidates():
    world = make_world()
    sel = qa.select("knock over the red block", qa.default_policy_cards(),
                    qa.object_cards_for_world(world), qa.BaselineCosineScorer())
    assert len(sel.task_scores) == 3 and len(sel.object_scores) == 4
    assert len(sel.task_candidates) == 3 and len(sel.object_candidates) == 4
    assert sel.task_scores[0] == max(sel.task_scores)


# -- external scorer ----------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    response = None  # set per test

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        resp = _Handler.response  # class access: avoid binding the callable
        doc = resp(body) if callable(resp) else resp
        payload = json.dumps(doc).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def test_external_scorer_uses_remote_scores(http_server):
    _Handler.response = lambda body: {"scores": list(range(len(body["candidates"])))}
    scorer = qa.ExternalScorer(http_server)
    got = scorer.score("cmd", ["a", "b", "c"])
    assert got == [0.0, 1.0, 2.0]


def test_external_scorer_rejects_wrong_length_and_falls_back(http_server):
    _Handler.response = {"scores": [1.0]}
    scorer = qa.ExternalScorer(http_server)
    got = scorer.score("walk forward", ["a", "b"])
    assert got == qa.BaselineCosineScorer().score("walk forward", ["a", "b"])


def test_external_scorer_unreachable_falls_back():
    scorer = qa.ExternalScorer("http://127.0.0.1:1/score", timeout=0.2)
    got = scorer.score("walk forward", ["a", "b"])
    assert got == qa.BaselineCosineScorer().score("walk forward", ["a", "b"])


# -- goal construction --------------------------------------------------


def test_goal_for_selection_each_policy():
    world = make_world()
    base = dict(task_scores=[], object_scores=[], task_candidates=[], object_candidates=[])
    g = qa.goal_for_selection(world, qa.Selection("strike", "red_0", **base))
    assert isinstance(g, task_mod.StrikeGoal) and g.object_id == "red_0"
    g = qa.goal_for_selection(world, qa.Selection("location", "blue_2", **base))
    assert isinstance(g, task_mod.LocationGoal)
    np.testing.assert_array_equal(g.target, world.object_by_id("blue_2").p)
    g = qa.goal_for_selection(world, qa.Selection("facing", "green_1", **base))
    assert isinstance(g, task_mod.FacingGoal)
    assert np.linalg.norm(g.direction) == pytest.approx(1.0)
    with pytest.raises(KeyError):
        qa.goal_for_selection(world, qa.Selection("dance", "red_0", **base))


def test_goal_for_selection_facing_rejects_zero_offset():
    world = make_world()
    world.character.p = world.object_by_id("red_0").p.copy()
    base = dict(task_scores=[], object_scores=[], task_candidates=[], object_candidates=[])
    with pytest.raises(ValueError):
        qa.goal_for_selection(world, qa.Selection("facing", "red_0", **base))


# -- card config file ---------------------------------------------------


def test_load_cards(tmp_path):
    path = tmp_path / "cards.json"
    path.write_text(json.dumps({
        "policies": [{"id": "strike", "ability": "smash things"}],
        "objects": [{"id": "b1", "appearance": "the tall crate", "color": "red"}],
    }))
    policies, objects = qa.load_cards(path)
    assert policies == [qa.PolicyCard("strike", "smash things")]
    assert objects == [qa.ObjectCard("b1", "the tall crate", "red")]


# -- aggregator ---------------------------------------------------------


@pytest.fixture(scope="module")
def aggregator():
    cfg = EmbedConfig(d_model=8, d_att=4, d_z=4)
    emb = SkillEmbedding(cfg, init_embedding_params(cfg, np.random.default_rng(0)))
    policies = {
        pid: ppo.GaussianPolicy(ppo.OBS_DIM, 6, 4, hidden=(8, 8),
                                rng=np.random.default_rng(i))
        for i, pid in enumerate(["strike", "location", "facing"])
    }
    return qa.Aggregator(policies, emb)


def test_aggregator_caches_selection(aggregator):
    world = make_world()
    _, sel1, _ = aggregator.step(world, "walk forward", "knock over the red block")
    _, sel2, _ = aggregator.step(world, "walk forward", "knock over the red block")
    assert sel1 is sel2  # cached, not re-selected


def test_aggregator_cached_equals_fresh_selection(aggregator):
    world = make_world()
    _, sel, _ = aggregator.step(world, "walk forward", "walk to the green block")
    fresh = qa.select("walk to the green block", aggregator.policy_cards,
                      qa.object_cards_for_world(world), aggregator.scorer)
    assert (sel.policy_id, sel.object_id) == (fresh.policy_id, fresh.object_id)
    assert sel.task_scores == fresh.task_scores


def test_aggregator_command_switch_changes_policy(aggregator):
    world = make_world()
    a1, sel1, g1 = aggregator.step(world, "walk forward", "walk to the blue block")
    assert sel1.policy_id == "location"
    a2, sel2, g2 = aggregator.step(world, "walk forward", "knock over the blue block")
    assert sel2.policy_id == "strike"
    assert isinstance(g2, task_mod.StrikeGoal)
    assert not np.array_equal(a1, a2)


def test_aggregator_action_shape_and_determinism(aggregator):
    world = make_world()
    a1, _, _ = aggregator.step(world, "walk forward", "face the red block")
    a2, _, _ = aggregator.step(world, "walk forward", "face the red block")
    assert a1.shape == (4,)
    np.testing.assert_array_equal(a1, a2)
    assert np.all(np.abs(a1) <= 1.0)


def test_aggregator_missing_policy_raises():
    cfg = EmbedConfig(d_model=8, d_att=4, d_z=4)
    emb = SkillEmbedding(cfg, init_embedding_params(cfg, np.random.default_rng(0)))
    agg = qa.Aggregator({"location": ppo.GaussianPolicy(ppo.OBS_DIM, 6, 4, hidden=(8, 8))},
                        emb, policy_cards=qa.default_policy_cards())
    with pytest.raises(KeyError, match="strike"):
        agg.step(make_world(), "walk forward", "knock over the red block")
