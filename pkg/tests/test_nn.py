"""MLP stack, optimizer, gradient checking, and PCA."""

import numpy as np
import pytest

from langchar import autodiff as ad
from langchar.autodiff import Tensor
from langchar.nn import (
    AdamState,
    MlpSpec,
    ParamSet,
    adam_step,
    check_gradients,
    finite_difference_grad,
    init_mlp_params,
    mlp_apply,
    mlp_forward,
    mlp_input_gradient,
    pca_fit,
    pca_project,
    value_and_grad,
)


# -- ParamSet -----------------------------------------------------------


def test_paramset_rejects_nonfinite_and_duplicates():
    p = ParamSet()
    p.add("w", np.ones(3))
    with pytest.raises(KeyError):
        p.add("w", np.ones(3))
    with pytest.raises(ValueError):
        p.add("bad", np.array([1.0, np.nan]))


def test_paramset_shape_locked_after_creation():
    p = ParamSet({"w": np.ones((2, 2))})
    with pytest.raises(ValueError):
        p["w"] = np.ones(3)


def test_paramset_iteration_order_deterministic():
    p = ParamSet()
    for name in ["b", "a", "c"]:
        p.add(name, np.zeros(1))
    assert list(p) == ["b", "a", "c"]


# -- MLP forward --------------------------------------------------------


def test_mlp_forward_zero_params_gives_zero_output():
    spec = MlpSpec((2, 3, 2))
    params = ParamSet({
        "w0": np.zeros((2, 3)), "b0": np.zeros(3),
        "w1": np.zeros((3, 2)), "b1": np.zeros(2),
    })
    np.testing.assert_array_equal(mlp_forward(spec, params, np.array([1.0, 2.0])), [0, 0])


def test_mlp_forward_identity_passthrough():
    spec = MlpSpec((2, 2, 2))
    params = ParamSet({
        "w0": np.eye(2), "b0": np.zeros(2),
        "w1": np.eye(2), "b1": np.zeros(2),
    })
    # positive inputs pass the relu unchanged
    np.testing.assert_allclose(mlp_forward(spec, params, np.array([1.0, 2.0])), [1, 2])


def test_mlp_forward_matches_explicit_matrix_arithmetic():
    rng = np.random.default_rng(0)
    spec = MlpSpec((2, 2, 2))
    params = init_mlp_params(spec, rng)
    x = np.array([1.0, 0.0], dtype=np.float32)
    # independent oracle: explicit matrix arithmetic
    h = x @ params["w0"] + params["b0"]
    h = np.maximum(h, 0)
    expect = h @ params["w1"] + params["b1"]
    np.testing.assert_allclose(mlp_forward(spec, params, x), expect, rtol=1e-6)


def test_mlp_forward_is_pure():
    rng = np.random.default_rng(3)
    spec = MlpSpec((4, 8, 2))
    params = init_mlp_params(spec, rng)
    x = rng.standard_normal((5, 4)).astype(np.float32)
    a = mlp_forward(spec, params, x)
    b = mlp_forward(spec, params, x)
    assert np.array_equal(a, b)


def test_mlp_forward_rejects_width_mismatch():
    spec = MlpSpec((4, 8, 2))
    params = init_mlp_params(spec, np.random.default_rng(0))
    with pytest.raises(ValueError, match="width"):
        mlp_forward(spec, params, np.zeros(3))


def test_mlp_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec((2, 3))  # no hidden layer
    with pytest.raises(ValueError):
        MlpSpec((2, 0, 1))
    with pytest.raises(ValueError):
        MlpSpec((2, 3, 1), activation="gelu")


def test_mlp_apply_matches_mlp_forward():
    rng = np.random.default_rng(4)
    for output in ("identity", "tanh", "sigmoid"):
        spec = MlpSpec((3, 6, 2), output=output)
        params = init_mlp_params(spec, rng)
        x = rng.standard_normal((4, 3)).astype(np.float32)
        graph = mlp_apply(spec, params.as_tensors(), Tensor(x))
        np.testing.assert_allclose(graph.data, mlp_forward(spec, params, x), rtol=1e-6)


# -- value_and_grad / gradient checking ---------------------------------


def test_quadratic_loss_gradient_equals_params():
    params = ParamSet({"w": np.array([1.0, -2.0, 3.0])})

    def loss(t):
        return ad.mul(Tensor(np.float64(0.5)), ad.tsum(ad.square(t["w"])))

    _, grads = value_and_grad(loss, params.astype(np.float64))
    np.testing.assert_allclose(grads["w"], params["w"], rtol=1e-6)


def test_constant_loss_zero_gradient():
    params = ParamSet({"w": np.ones(3)})
    _, grads = value_and_grad(lambda t: Tensor(np.float64(7.0)), params)
    np.testing.assert_array_equal(grads["w"], np.zeros(3))


def test_value_and_grad_flags_nonfinite_loss():
    params = ParamSet({"w": np.array([0.0])})
    with pytest.raises(FloatingPointError):
        value_and_grad(lambda t: ad.log(t["w"]), params)


def test_finite_difference_grad_matches_analytic_on_mlp():
    rng = np.random.default_rng(5)
    spec = MlpSpec((3, 4, 1))
    params = init_mlp_params(spec, rng)
    x = rng.standard_normal((6, 3))

    def loss(t):
        return ad.tmean(ad.square(mlp_apply(spec, t, Tensor(x))))

    _, analytic = value_and_grad(loss, params.astype(np.float64))
    fd = finite_difference_grad(loss, params)
    for name in params:
        np.testing.assert_allclose(analytic[name], fd[name], rtol=1e-4, atol=1e-7)


def test_check_gradients_mlp_probe_suite():
    rng = np.random.default_rng(6)
    spec = MlpSpec((4, 8, 8, 1))
    params = init_mlp_params(spec, rng)
    x = rng.standard_normal((10, 4))

    def loss(t):
        return ad.tmean(ad.square(mlp_apply(spec, t, Tensor(x))))

    assert check_gradients(loss, params, n_probes=100) <= 1e-4


def test_mlp_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    spec = MlpSpec((5, 8, 8, 1))
    params = init_mlp_params(spec, rng)
    x = rng.standard_normal((3, 5)).astype(np.float64)
    tensors = {k: Tensor(v.astype(np.float64)) for k, v in params.items()}
    g = mlp_input_gradient(spec, tensors, x).data
    p64 = params.astype(np.float64)
    step = 1e-6
    for b in range(x.shape[0]):
        for i in range(x.shape[1]):
            xp, xm = x.copy(), x.copy()
            xp[b, i] += step
            xm[b, i] -= step
            fd = (mlp_forward(spec, p64, xp)[b, 0] - mlp_forward(spec, p64, xm)[b, 0]) / (2 * step)
            assert abs(g[b, i] - fd) <= 1e-4 * max(1.0, abs(fd))


# -- Adam ---------------------------------------------------------------


def test_adam_zero_grad_is_fixed_point():
    params = ParamSet({"w": np.array([1.0, 2.0], dtype=np.float32)})
    state = AdamState.init(params)
    before = params["w"].copy()
    adam_step(params, ParamSet({"w": np.zeros(2)}), state, lr=0.1)
    np.testing.assert_array_equal(params["w"], before)
    assert state.step_count == 1


def test_adam_first_step_is_signed_lr():
    # Bias correction makes |update| = lr / (1 + eps/|g|-ish) ~ lr on step 1.
    g = np.array([0.3, -2.0], dtype=np.float64)
    params = ParamSet({"w": np.zeros(2)})
    state = AdamState.init(params)
    adam_step(params, ParamSet({"w": g}), state, lr=0.01)
    expect = -0.01 * g / (np.abs(g) + state.eps)
    np.testing.assert_allclose(params["w"], expect, rtol=1e-6)


def test_adam_two_identical_steps_match_hand_calculation():
    g = np.array([0.5], dtype=np.float64)
    params = ParamSet({"w": np.zeros(1)})
    state = AdamState.init(params)
    lr, b1, b2, eps = 0.1, state.beta1, state.beta2, state.eps
    adam_step(params, ParamSet({"w": g}), state, lr)
    adam_step(params, ParamSet({"w": g}), state, lr)
    # hand calculation
    m = v = 0.0
    w = 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g[0]
        v = b2 * v + (1 - b2) * g[0] ** 2
        w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    np.testing.assert_allclose(params["w"], [w], rtol=1e-9)
    assert state.step_count == 2


def test_adam_skips_nonfinite_grads():
    params = ParamSet({"w": np.ones(2, dtype=np.float32)})
    state = AdamState.init(params)
    before = params["w"].copy()
    bad = ParamSet()
    bad.add("w", np.array([1.0, np.inf]), check_finite=False)
    adam_step(params, bad, state, lr=0.1)
    np.testing.assert_array_equal(params["w"], before)
    assert state.skipped == 1
    assert state.step_count == 0


# -- PCA ----------------------------------------------------------------


def test_pca_line_in_3d_zero_reconstruction_error():
    t = np.linspace(-1, 1, 20)[:, None]
    direction = np.array([[1.0, 2.0, -1.0]])
    data = t @ direction + np.array([5.0, 0.0, 1.0])
    basis = pca_fit(data, 1)
    proj = pca_project(basis, data)
    recon = proj @ basis.components.T + basis.mean
    np.testing.assert_allclose(recon, data, atol=1e-9)


def test_pca_full_rank_projection_preserves_norms():
    rng = np.random.default_rng(8)
    data = rng.standard_normal((200, 2))
    basis = pca_fit(data, 2)
    centered = data - basis.mean
    proj = pca_project(basis, data)
    np.testing.assert_allclose(
        np.linalg.norm(proj, axis=1), np.linalg.norm(centered, axis=1), atol=1e-6
    )


def test_pca_orthonormal_basis():
    rng = np.random.default_rng(9)
    data = rng.standard_normal((50, 6))
    basis = pca_fit(data, 3)
    gram = basis.components.T @ basis.components
    assert np.max(np.abs(gram - np.eye(3))) <= 1e-6


def test_pca_spectrum_matches_power_iteration_oracle():
    data = np.array([
        [2.0, 0.0, 1.0],
        [-1.0, 3.0, 0.5],
        [0.0, -2.0, 2.0],
        [1.5, 1.0, -1.0],
    ])
    basis = pca_fit(data, 1)
    # independent oracle: power iteration on the covariance matrix
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / (data.shape[0] - 1)
    v = np.ones(3)
    for _ in range(10_000):
        v = cov @ v
        v /= np.linalg.norm(v)
    lam = v @ cov @ v
    assert abs(basis.explained_variance[0] - lam) <= 1e-6
    assert abs(abs(v @ basis.components[:, 0]) - 1.0) <= 1e-6


def test_pca_rejects_bad_k():
    data = np.zeros((5, 3))
    with pytest.raises(ValueError):
        pca_fit(data, 4)
    with pytest.raises(ValueError):
        pca_fit(data, 0)
