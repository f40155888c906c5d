"""Dense-network building blocks: parameter sets, MLPs, Adam, gradient
checking, and PCA."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class ParamSet:
    """Named float32 arrays with deterministic iteration order.

    Shapes are fixed at creation; values must stay finite.
    """

    def __init__(self, arrays=None):
        self._arrays = {}
        if arrays:
            for name, arr in arrays.items():
                self.add(name, arr)

    def add(self, name, arr, check_finite=True):
        arr = np.asarray(arr)
        if arr.dtype != np.float64:
            arr = arr.astype(np.float32)
        if check_finite and not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values in parameter {name!r}")
        if name in self._arrays:
            raise KeyError(f"duplicate parameter {name!r}")
        self._arrays[name] = arr

    def __getitem__(self, name):
        return self._arrays[name]

    def __setitem__(self, name, arr):
        arr = np.asarray(arr, dtype=self._arrays[name].dtype)
        if arr.shape != self._arrays[name].shape:
            raise ValueError(
                f"shape change for {name!r}: {self._arrays[name].shape} -> {arr.shape}"
            )
        self._arrays[name] = arr

    def __contains__(self, name):
        return name in self._arrays

    def __iter__(self):
        return iter(self._arrays)

    def __len__(self):
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    def keys(self):
        return self._arrays.keys()

    def copy(self):
        return ParamSet({k: v.copy() for k, v in self._arrays.items()})

    def astype(self, dtype):
        out = ParamSet()
        out._arrays = {k: v.astype(dtype) for k, v in self._arrays.items()}
        return out

    def as_tensors(self):
        """Dict of leaf Tensors sharing this set's arrays."""
        return {k: Tensor(v, requires_grad=True) for k, v in self._arrays.items()}

    def flat(self):
        return np.concatenate([v.ravel() for v in self._arrays.values()])

    def n_params(self):
        return sum(v.size for v in self._arrays.values())


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected net: sizes[0] inputs -> hidden layers -> sizes[-1] outputs.

    activation applies to hidden layers; output_transform to the last layer.
    """

    sizes: tuple
    activation: str = "relu"
    output: str = "identity"

    def __post_init__(self):
        if len(self.sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if any(int(s) <= 0 for s in self.sizes):
            raise ValueError("layer widths must be positive")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output not in ("identity", "tanh", "sigmoid"):
            raise ValueError(f"unknown output transform {self.output!r}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def n_layers(self):
        return len(self.sizes) - 1


def init_mlp_params(spec: MlpSpec, rng: np.random.Generator, prefix="", scale=1.0) -> ParamSet:
    """He-style init, final layer scaled by `scale` (0 gives a zero head)."""
    params = ParamSet()
    for i in range(spec.n_layers):
        fan_in, fan_out = spec.sizes[i], spec.sizes[i + 1]
        w = rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        if i == spec.n_layers - 1:
            w *= scale
            b = np.zeros(fan_out)
        else:
            # keep relu pre-activations off the exact kink
            b = rng.uniform(-0.05, 0.05, fan_out)
        params.add(f"{prefix}w{i}", w.astype(np.float32))
        params.add(f"{prefix}b{i}", b.astype(np.float32))
    return params


_ACT_NP = {"relu": lambda x: np.maximum(x, 0), "tanh": np.tanh}
_OUT_NP = {
    "identity": lambda x: x,
    "tanh": np.tanh,
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
}


def mlp_forward(spec: MlpSpec, params: ParamSet, x, prefix="") -> np.ndarray:
    """Pure numpy forward pass (batched or single input)."""
    x = np.asarray(x)
    width = x.shape[-1]
    if width != spec.sizes[0]:
        raise ValueError(f"input width {width} != spec input {spec.sizes[0]}")
    act = _ACT_NP[spec.activation]
    for i in range(spec.n_layers):
        x = x @ params[f"{prefix}w{i}"] + params[f"{prefix}b{i}"]
        if i < spec.n_layers - 1:
            x = act(x)
    return _OUT_NP[spec.output](x)


def mlp_apply(spec: MlpSpec, tensors: dict, x: Tensor, prefix="") -> Tensor:
    """Autodiff forward pass using leaf tensors from ParamSet.as_tensors()."""
    act = ad.relu if spec.activation == "relu" else ad.tanh
    h = x
    for i in range(spec.n_layers):
        h = ad.add(ad.matmul(h, tensors[f"{prefix}w{i}"]), tensors[f"{prefix}b{i}"])
        if i < spec.n_layers - 1:
            h = act(h)
    if spec.output == "tanh":
        h = ad.tanh(h)
    elif spec.output == "sigmoid":
        h = ad.sigmoid(h)
    return h


def mlp_input_gradient(spec: MlpSpec, tensors: dict, x: np.ndarray, prefix="") -> Tensor:
    """Gradient of the pre-transform MLP output w.r.t. its input, as a
    differentiable expression in the parameters.

    Only valid for relu hidden units and a scalar output; the relu masks
    are treated as locally constant (exact almost everywhere).  Returns a
    Tensor of shape (batch, in_dim).
    """
    if spec.activation != "relu":
        raise ValueError("input gradient path requires relu hidden units")
    if spec.sizes[-1] != 1:
        raise ValueError("input gradient path requires scalar output")
    x = np.atleast_2d(np.asarray(x))
    # Forward with numpy to collect masks.
    masks = []
    h = x
    for i in range(spec.n_layers - 1):
        pre = h @ tensors[f"{prefix}w{i}"].data + tensors[f"{prefix}b{i}"].data
        masks.append((pre > 0).astype(x.dtype))
        h = np.maximum(pre, 0)
    # Backward sweep built from differentiable ops: g_i = (g_{i+1} W_i^T) * m_i
    g = ad.swapaxes(tensors[f"{prefix}w{spec.n_layers - 1}"], 0, 1)  # (1, d_last)
    g = ad.reshape(g, (1, -1))
    for i in reversed(range(spec.n_layers - 1)):
        g = ad.mul(g, Tensor(masks[i]))
        g = ad.matmul(g, ad.swapaxes(tensors[f"{prefix}w{i}"], 0, 1))
    return g


def value_and_grad(loss_fn, params: ParamSet):
    """Evaluate loss_fn(tensors) and return (value, gradient ParamSet).

    Non-finite losses are flagged by raising FloatingPointError; gradients
    are withheld in that case.
    """
    tensors = params.as_tensors()
    loss = loss_fn(tensors)
    value = float(loss.data)
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite loss {value}")
    loss.backward()
    grads = ParamSet()
    for name in params:
        g = tensors[name].grad
        grads.add(name, g if g is not None else np.zeros_like(params[name]), check_finite=False)
    return value, grads


def finite_difference_grad(loss_fn, params: ParamSet, step=1e-3) -> ParamSet:
    """Central differences on a float64 shadow copy of the parameters."""
    shadow = params.astype(np.float64)
    grads = {}
    for name in shadow:
        arr = shadow._arrays[name]
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            hi = float(loss_fn(shadow.as_tensors()).data)
            arr[idx] = orig - step
            lo = float(loss_fn(shadow.as_tensors()).data)
            arr[idx] = orig
            g[idx] = (hi - lo) / (2 * step)
        grads[name] = g
    out = ParamSet()
    out._arrays = grads
    return out


def check_gradients(loss_fn, params: ParamSet, n_probes=100, step=1e-3, rng=None):
    """Compare analytic gradients with central differences on random probes.

    Returns the max relative error over the probed coordinates.
    """
    rng = rng or np.random.default_rng(0)
    shadow = params.astype(np.float64)
    _, analytic = value_and_grad(loss_fn, shadow)
    names = list(params.keys())
    worst = 0.0
    for _ in range(n_probes):
        name = names[rng.integers(len(names))]
        arr = shadow._arrays[name]
        idx = tuple(rng.integers(s) for s in arr.shape)
        orig = arr[idx]
        arr[idx] = orig + step
        hi = float(loss_fn(shadow.as_tensors()).data)
        arr[idx] = orig - step
        lo = float(loss_fn(shadow.as_tensors()).data)
        arr[idx] = orig
        fd = (hi - lo) / (2 * step)
        an = analytic[name][idx]
        denom = max(abs(fd), abs(an), 1e-6)
        worst = max(worst, abs(fd - an) / denom)
    return worst


@dataclass
class AdamState:
    """Adaptive-moment optimizer state for one ParamSet."""

    m: ParamSet
    v: ParamSet
    step_count: int = 0
    skipped: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: ParamSet, beta1=0.9, beta2=0.999, eps=1e-8):
        zeros = lambda: ParamSet({k: np.zeros_like(v) for k, v in params.items()})
        return cls(m=zeros(), v=zeros(), beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: ParamSet, grads: ParamSet, state: AdamState, lr: float):
    """One bias-corrected Adam update, in place on params.

    Non-finite gradients skip the update (parameters and moments
    untouched) and increment the skip counter.
    """
    for name in grads:
        if not np.all(np.isfinite(grads[name])):
            state.skipped += 1
            return params, state
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for name in params:
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1 - b1) * g
        state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = state.m[name] / (1 - b1**t)
        v_hat = state.v[name] / (1 - b2**t)
        params[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


# -- PCA ----------------------------------------------------------------


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # (d, k), orthonormal columns
    explained_variance: np.ndarray = field(default=None)


def pca_fit(data: np.ndarray, k: int) -> PcaBasis:
    """Top-k principal axes of an n x d data matrix via SVD."""
    data = np.asarray(data, dtype=np.float64)
    n, d = data.shape
    if not (1 <= k <= d):
        raise ValueError(f"k={k} out of range for d={d}")
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    mean = data.mean(axis=0)
    _, s, vt = np.linalg.svd(data - mean, full_matrices=False)
    return PcaBasis(
        mean=mean,
        components=vt[:k].T.copy(),
        explained_variance=(s[:k] ** 2) / max(n - 1, 1),
    )


def pca_project(basis: PcaBasis, v: np.ndarray) -> np.ndarray:
    return (np.asarray(v) - basis.mean) @ basis.components
