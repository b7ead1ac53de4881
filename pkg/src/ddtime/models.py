"""Small forecasting models with closed-form forward passes and exact gradients.

Two architectures, both applying the same weights independently to every
variable of a multivariate window:

* ``channel_linear`` — a single ``[t_out, t_in]`` affine map per variable.
* ``mlp`` — a per-variable feed-forward net with tanh hidden layers and a
  linear output.

Parameters live in flat float64 vectors laid out layer by layer as
``[W_0.ravel(), b_0, W_1.ravel(), b_1, ...]`` with ``W_l`` of shape
``[fan_out, fan_in]``. Batches of windows are processed as flattened rows
``[batch * n_vars, t_in]`` since weights are shared across variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import WindowPair
from .errors import ShapeMismatchError

MODEL_KINDS = ("channel_linear", "mlp")
MODEL_KIND_CODES = {"channel_linear": 0, "mlp": 1}
MODEL_KIND_NAMES = {v: k for k, v in MODEL_KIND_CODES.items()}


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; parameter count is a pure function of this."""

    kind: str
    t_in: int
    t_out: int
    n_vars: int
    hidden_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if min(self.t_in, self.t_out, self.n_vars) < 1:
            raise ValueError("t_in, t_out, n_vars must all be >= 1")
        if self.kind == "mlp" and not self.hidden_dims:
            raise ValueError("mlp requires at least one hidden dim")
        if self.kind == "channel_linear" and self.hidden_dims:
            raise ValueError("channel_linear takes no hidden dims")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError("hidden dims must be >= 1")


def layer_shapes(spec: ModelSpec) -> list[tuple[int, int]]:
    """``(fan_out, fan_in)`` per layer, input to output."""
    dims = [spec.t_in, *spec.hidden_dims, spec.t_out]
    return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]


def parameter_count(spec: ModelSpec) -> int:
    return sum(out * inp + out for out, inp in layer_shapes(spec))


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Uniform ``[-1/sqrt(fan_in), +1/sqrt(fan_in)]`` weights, zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for out, inp in layer_shapes(spec):
        bound = 1.0 / np.sqrt(inp)
        chunks.append(rng.uniform(-bound, bound, size=out * inp))
        chunks.append(np.zeros(out))
    return np.concatenate(chunks)


def unpack_params(spec: ModelSpec, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer ``(W, b)`` views."""
    if theta.shape != (parameter_count(spec),):
        raise ShapeMismatchError(
            f"parameter vector has shape {theta.shape}, expected ({parameter_count(spec)},)"
        )
    layers = []
    pos = 0
    for out, inp in layer_shapes(spec):
        w = theta[pos : pos + out * inp].reshape(out, inp)
        pos += out * inp
        b = theta[pos : pos + out]
        pos += out
        layers.append((w, b))
    return layers


def pack_params(parts: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in parts])


def forward_rows(
    spec: ModelSpec, theta: np.ndarray, x_rows: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass over ``[R, t_in]`` rows.

    Returns predictions ``[R, t_out]`` and the list of layer inputs
    ``hs[l]`` (``hs[0]`` is the input itself) needed by the backward pass.
    """
    layers = unpack_params(spec, theta)
    h = x_rows
    hs = [h]
    for w, b in layers[:-1]:
        h = np.tanh(h @ w.T + b)
        hs.append(h)
    w, b = layers[-1]
    return h @ w.T + b, hs


def backward_rows(
    spec: ModelSpec,
    theta: np.ndarray,
    hs: list[np.ndarray],
    g_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Pull an output gradient ``g_out [R, t_out]`` back to (d_theta, d_x_rows)."""
    layers = unpack_params(spec, theta)
    n_layers = len(layers)
    d_w = [None] * n_layers
    d_b = [None] * n_layers
    w, _ = layers[-1]
    d_w[-1] = g_out.T @ hs[-1]
    d_b[-1] = g_out.sum(axis=0)
    d_h = g_out @ w
    for l in range(n_layers - 2, -1, -1):
        w, _ = layers[l]
        delta = d_h * (1.0 - hs[l + 1] ** 2)  # tanh'(a) = 1 - tanh(a)^2
        d_w[l] = delta.T @ hs[l]
        d_b[l] = delta.sum(axis=0)
        d_h = delta @ w
    return pack_params(list(zip(d_w, d_b))), d_h


def forward(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Map one ``[d, t_in]`` window to a ``[d, t_out]`` forecast."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.n_vars, spec.t_in):
        raise ShapeMismatchError(
            f"input has shape {x.shape}, expected {(spec.n_vars, spec.t_in)}"
        )
    y, _ = forward_rows(spec, params, x)
    return y


def forward_batch(spec: ModelSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Map ``[B, d, t_in]`` windows to ``[B, d, t_out]`` forecasts."""
    batch, d, t_in = x.shape
    if (d, t_in) != (spec.n_vars, spec.t_in):
        raise ShapeMismatchError(
            f"batch has window shape {(d, t_in)}, expected {(spec.n_vars, spec.t_in)}"
        )
    y, _ = forward_rows(spec, params, x.reshape(batch * d, t_in))
    return y.reshape(batch, d, spec.t_out)


def mse_loss_and_grad_arrays(
    spec: ModelSpec, theta: np.ndarray, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean-squared-error loss and its exact parameter gradient on arrays.

    ``x`` is ``[B, d, t_in]``, ``y`` is ``[B, d, t_out]``; the loss averages
    over batch, variables, and horizon.
    """
    batch, d, _ = x.shape
    rows = x.reshape(batch * d, spec.t_in)
    targets = y.reshape(batch * d, spec.t_out)
    preds, hs = forward_rows(spec, theta, rows)
    resid = preds - targets
    m = resid.size
    loss = float((resid**2).sum() / m)
    d_theta, _ = backward_rows(spec, theta, hs, (2.0 / m) * resid)
    return loss, d_theta


def loss_and_grad(
    spec: ModelSpec, params: np.ndarray, batch: list[WindowPair]
) -> tuple[float, np.ndarray]:
    """Batch MSE and analytic gradient for a list of window pairs."""
    if not batch:
        raise ValueError("empty batch")
    x = np.stack([p.input for p in batch])
    y = np.stack([p.target for p in batch])
    return mse_loss_and_grad_arrays(spec, params, x, y)


def param_sq_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Euclidean distance between two flat parameter vectors."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"length mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff)


# --- optimizers ---


@dataclass
class SgdMomentumState:
    velocity: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "SgdMomentumState":
        return cls(velocity=np.zeros(n))


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(first_moment=np.zeros(n), second_moment=np.zeros(n))


def sgd_momentum_step(
    params: np.ndarray,
    grad: np.ndarray,
    lr: float,
    momentum: float,
    state: SgdMomentumState,
) -> tuple[np.ndarray, SgdMomentumState]:
    """``v <- momentum*v + g; theta <- theta - lr*v`` (state updated in place)."""
    if params.shape != grad.shape or params.shape != state.velocity.shape:
        raise ShapeMismatchError("params, grad, and velocity must share a shape")
    state.velocity *= momentum
    state.velocity += grad
    return params - lr * state.velocity, state


def adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    state: AdamState | None = None,
) -> tuple[np.ndarray, AdamState]:
    """Standard bias-corrected Adam update (state updated in place)."""
    beta1, beta2 = betas
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError(f"betas must lie in [0, 1), got {betas}")
    if state is None:
        state = AdamState.zeros(params.size)
    if params.shape != grad.shape or params.shape != state.first_moment.shape:
        raise ShapeMismatchError("params, grad, and moments must share a shape")
    state.step += 1
    state.first_moment *= beta1
    state.first_moment += (1.0 - beta1) * grad
    state.second_moment *= beta2
    state.second_moment += (1.0 - beta2) * grad**2
    m_hat = state.first_moment / (1.0 - beta1**state.step)
    v_hat = state.second_moment / (1.0 - beta2**state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), state
