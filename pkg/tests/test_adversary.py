"""Discriminator scoring, four-term loss, gradient penalty, skill reward."""

import numpy as np
import pytest

from langchar import adversary as adv
from langchar.autodiff import Tensor
from langchar.nn import MlpSpec, ParamSet, check_gradients, init_mlp_params

OBS = 7
DZ = 4


def make_disc(seed=0, marginal=False, hidden=(16, 8)):
    return adv.Discriminator(OBS, DZ, hidden=hidden, rng=np.random.default_rng(seed),
                             marginal=marginal)


def batch(rng, n=8):
    s = rng.standard_normal((n, OBS)).astype(np.float32)
    sn = rng.standard_normal((n, OBS)).astype(np.float32)
    z = rng.standard_normal((n, DZ)).astype(np.float32)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return s, sn, z


def test_zero_weight_net_scores_half():
    d = make_disc()
    for name in d.params:
        d.params[name] = np.zeros_like(d.params[name])
    s, sn, z = batch(np.random.default_rng(0))
    np.testing.assert_allclose(d.score(s, sn, z), 0.5)


def test_score_always_clamped():
    d = make_disc()
    # blow up the final layer to force saturation
    d.params["w2"] = d.params["w2"] * 1e4
    s, sn, z = batch(np.random.default_rng(1), n=64)
    p = d.score(s, sn, z)
    assert np.all(p >= adv.SCORE_CLAMP) and np.all(p <= 1 - adv.SCORE_CLAMP)


def test_score_deterministic_and_shape_checked():
    d = make_disc()
    s, sn, z = batch(np.random.default_rng(2))
    np.testing.assert_array_equal(d.score(s, sn, z), d.score(s, sn, z))
    with pytest.raises(ValueError, match="state width"):
        d.score(s[:, :5], sn, z)
    with pytest.raises(ValueError, match="latent width"):
        d.score(s, sn, z[:, :2])


def test_skill_reward_values_and_bounds():
    assert -np.log(1 - 0.5) == pytest.approx(0.693147, abs=1e-6)
    d = make_disc()
    for name in d.params:
        d.params[name] = np.zeros_like(d.params[name])
    s, sn, z = batch(np.random.default_rng(3))
    np.testing.assert_allclose(d.skill_reward(s, sn, z), np.log(2), rtol=1e-6)
    # clamp bound: r is in (0, -log(1e-4)]
    assert adv.REWARD_MAX == pytest.approx(-np.log(adv.SCORE_CLAMP))
    d.params["w2"] = np.abs(make_disc(9).params["w2"]) * 1e4
    r = d.skill_reward(s, sn, z)
    assert np.all(r > 0) and np.all(r <= adv.REWARD_MAX + 1e-6)


def test_skill_reward_monotone_in_score():
    p = np.linspace(0.01, 0.99, 50)
    r = -np.log(1 - p)
    assert np.all(np.diff(r) > 0)


def test_disc_loss_at_half_is_2_log2():
    d = make_disc()
    for name in d.params:
        d.params[name] = np.zeros_like(d.params[name])
    rng = np.random.default_rng(4)
    real, agent, other = batch(rng), batch(rng), batch(rng)
    cfg = adv.DiscLossConfig(w_d=0.5, w_gp=0.0)
    assert adv.disc_loss(d, real, agent, other, cfg) == pytest.approx(2 * np.log(2), abs=1e-6)


def test_disc_loss_w_d_one_equals_two_term_reference():
    d = make_disc(5)
    rng = np.random.default_rng(5)
    real, agent = batch(rng), batch(rng)
    cfg = adv.DiscLossConfig(w_d=1.0, w_gp=0.0)
    got = adv.disc_loss(d, real, agent, None, cfg)
    # independent two-term reference
    ref = float(
        -np.mean(np.log(d.score(*real))) - np.mean(np.log(1 - d.score(*agent)))
    )
    assert got == pytest.approx(ref, abs=1e-9)


def test_disc_loss_rejects_empty_batches():
    d = make_disc()
    rng = np.random.default_rng(6)
    empty = (np.zeros((0, OBS), np.float32), np.zeros((0, OBS), np.float32),
             np.zeros((0, DZ), np.float32))
    cfg = adv.DiscLossConfig()
    with pytest.raises(ValueError, match="empty"):
        adv.disc_loss(d, empty, batch(rng), batch(rng), cfg)
    with pytest.raises(ValueError, match="other"):
        adv.disc_loss(d, batch(rng), batch(rng), None, cfg)


def test_loss_config_validation():
    with pytest.raises(ValueError):
        adv.DiscLossConfig(w_d=1.5)
    with pytest.raises(ValueError):
        adv.DiscLossConfig(w_gp=-1.0)


def test_gradient_penalty_zero_for_constant_output():
    d = make_disc()
    # zero first-layer weights make D constant in its inputs
    d.params["w0"] = np.zeros_like(d.params["w0"])
    rng = np.random.default_rng(7)
    assert adv.gradient_penalty(d, batch(rng)) == pytest.approx(0.0, abs=1e-12)


def test_gradient_penalty_nonnegative():
    rng = np.random.default_rng(8)
    for seed in range(3):
        d = make_disc(seed)
        assert adv.gradient_penalty(d, batch(rng)) >= 0.0


def test_gradient_penalty_linear_model_closed_form():
    # single hidden unit with identity-like path: D = sigmoid(w1 * relu(w0 x))
    d = adv.Discriminator(OBS, DZ, hidden=(1,), rng=np.random.default_rng(9))
    w0 = np.zeros((2 * OBS + DZ, 1), dtype=np.float32)
    w0[: 2 * OBS, 0] = np.arange(1, 2 * OBS + 1, dtype=np.float32) * 0.05
    d.params["w0"] = w0
    d.params["b0"] = np.array([0.1], dtype=np.float32)
    d.params["w1"] = np.array([[0.7]], dtype=np.float32)
    d.params["b1"] = np.array([0.0], dtype=np.float32)
    rng = np.random.default_rng(10)
    real = batch(rng, n=16)
    got = adv.gradient_penalty(d, real)
    # closed form: grad wrt (s, s') is sigma'(logit) * w1 * w0_{ss} when the
    # hidden unit is active, 0 otherwise
    x = d._inputs(*real)
    pre = x @ w0[:, 0] + 0.1
    logit = np.maximum(pre, 0) * 0.7
    sig = 1 / (1 + np.exp(-logit))
    per_sample = (sig * (1 - sig)) ** 2 * (pre > 0) * (0.7**2) * np.sum(w0[: 2 * OBS, 0] ** 2)
    assert got == pytest.approx(float(per_sample.mean()), rel=1e-6)


def test_gradient_penalty_excludes_latent_block():
    # weights only on the z block -> zero penalty even though D varies with z
    d = adv.Discriminator(OBS, DZ, hidden=(4,), rng=np.random.default_rng(11))
    w0 = np.zeros_like(d.params["w0"])
    w0[2 * OBS :, :] = 0.5
    d.params["w0"] = w0
    rng = np.random.default_rng(12)
    assert adv.gradient_penalty(d, batch(rng)) == pytest.approx(0.0, abs=1e-12)


def test_disc_loss_gradients_match_finite_differences():
    d = make_disc(13, hidden=(8, 4))
    rng = np.random.default_rng(13)
    real, agent, other = batch(rng, 4), batch(rng, 4), batch(rng, 4)
    cfg = adv.DiscLossConfig()

    def loss(t):
        return adv.disc_loss_graph(d, t, real, agent, other, cfg)

    assert check_gradients(loss, d.params, n_probes=100) <= 1e-4


def test_disc_update_decreases_loss_on_fixed_batch():
    from langchar.nn import AdamState

    d = make_disc(14)
    rng = np.random.default_rng(14)
    real, agent, other = batch(rng, 32), batch(rng, 32), batch(rng, 32)
    cfg = adv.DiscLossConfig()
    adam = AdamState.init(d.params)
    first = adv.disc_loss(d, real, agent, other, cfg)
    for _ in range(20):
        last = adv.disc_update(d, real, agent, other, cfg, adam, 1e-3)
    assert last < first


def test_marginal_mode_ignores_latent():
    d = make_disc(15, marginal=True)
    rng = np.random.default_rng(15)
    s, sn, z = batch(rng)
    z2 = -z
    np.testing.assert_array_equal(d.score(s, sn, z), d.score(s, sn, z2))


def test_discriminator_checkpoint_round_trip(tmp_path):
    d = make_disc(16)
    path = tmp_path / "d.json"
    d.save(path)
    loaded = adv.Discriminator.load(path)
    rng = np.random.default_rng(16)
    s, sn, z = batch(rng)
    np.testing.assert_array_equal(d.score(s, sn, z), loaded.score(s, sn, z))
    assert loaded.marginal == d.marginal
