"""Exact reverse-mode differentiation through unrolled student training.

The student minimizes full-batch MSE on the synthetic windows with plain
gradient descent: ``theta_{t+1} = theta_t - lr * g(theta_t, D)`` where
``g = grad_theta MSE``. Differentiating the final parameters with respect
to the synthetic tensor therefore needs, per step, the Hessian-vector
product ``H v`` and the mixed second derivatives ``d^2 L / dD dtheta @ v``.
Both come out of one forward-over-reverse sweep (``_rop_inner_grad``): the
directional derivative along ``v`` of the whole gradient computation. The
Hessian is symmetric, so that directional derivative *is* the transpose
product the reverse pass needs.

The trace stores the parameter vector before every step plus one copy of
the synthetic arrays, i.e. ``(K+1) * param_count + S*d*(t_in+t_out)``
floats; forward intermediates are recomputed during the reverse sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ShapeMismatchError
from .models import (
    ModelSpec,
    forward_rows,
    mse_loss_and_grad_arrays,
    pack_params,
    unpack_params,
)
from .synthetic import SyntheticDataset


@dataclass(eq=False)
class UnrollTrace:
    """Everything needed to replay K student steps and run the reverse sweep."""

    thetas: list[np.ndarray]  # length K+1; thetas[t] is the params before step t
    inputs: np.ndarray        # [S, d, t_in] snapshot of the synthetic inputs
    targets: np.ndarray       # [S, d, t_out] snapshot of the synthetic targets
    lr: float
    spec: ModelSpec

    @property
    def k(self) -> int:
        return len(self.thetas) - 1

    def replay(self) -> np.ndarray:
        """Re-run the forward unroll from the stored start; bit-exact."""
        theta = self.thetas[0].copy()
        for _ in range(self.k):
            _, grad = mse_loss_and_grad_arrays(self.spec, theta, self.inputs, self.targets)
            theta = theta - self.lr * grad
        return theta


@dataclass(eq=False)
class SyntheticGradient:
    """Gradient of a scalar objective w.r.t. the synthetic tensor slices."""

    d_inputs: np.ndarray   # [S, d, t_in]
    d_targets: np.ndarray  # [S, d, t_out]

    @classmethod
    def zeros_like(cls, dataset: SyntheticDataset) -> "SyntheticGradient":
        return cls(
            d_inputs=np.zeros_like(dataset.inputs),
            d_targets=np.zeros_like(dataset.targets),
        )

    def as_tensor(self) -> np.ndarray:
        """Concatenate back to the ``[S, d, t_in + t_out]`` layout."""
        return np.concatenate([self.d_inputs, self.d_targets], axis=2)


def unroll_student(
    theta_init: np.ndarray,
    synthetic: SyntheticDataset,
    spec: ModelSpec,
    k: int,
    lr: float,
) -> tuple[np.ndarray, UnrollTrace]:
    """Run ``k`` plain gradient-descent steps on the synthetic batch MSE.

    Raises ``DivergenceError`` if the loss goes non-finite mid-unroll
    (the caller should lower the learning rate).
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    inputs = synthetic.inputs.copy()
    targets = synthetic.targets.copy()
    theta = np.asarray(theta_init, dtype=np.float64).copy()
    thetas = [theta.copy()]
    for step in range(k):
        loss, grad = mse_loss_and_grad_arrays(spec, theta, inputs, targets)
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite student loss at unroll step {step}")
        theta = theta - lr * grad
        thetas.append(theta.copy())
    trace = UnrollTrace(thetas=thetas, inputs=inputs, targets=targets, lr=lr, spec=spec)
    return theta, trace


def _rop_inner_grad(
    spec: ModelSpec,
    theta: np.ndarray,
    inputs: np.ndarray,
    targets: np.ndarray,
    v: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Directional derivative along ``v`` (in parameter space) of the inner
    MSE gradients with respect to parameters, inputs, and targets.

    Returns ``(Hv, R_dX, R_dY)`` where ``Hv`` is the Hessian-vector product
    and ``R_dX``/``R_dY`` are the mixed second-derivative products, shaped
    like the flattened input/target rows.
    """
    layers = unpack_params(spec, theta)
    dirs = unpack_params(spec, v)
    batch, d, t_in = inputs.shape
    rows = inputs.reshape(batch * d, t_in)
    target_rows = targets.reshape(batch * d, spec.t_out)
    n_layers = len(layers)

    # forward pass with tangents (R(input rows) = 0)
    h = rows
    rh = np.zeros_like(rows)
    hs = [h]
    rhs = [rh]
    for (w, b), (vw, vb) in zip(layers[:-1], dirs[:-1]):
        a = h @ w.T + b
        ra = rh @ w.T + h @ vw.T + vb
        h = np.tanh(a)
        rh = (1.0 - h**2) * ra
        hs.append(h)
        rhs.append(rh)
    w, b = layers[-1]
    vw, vb = dirs[-1]
    preds = h @ w.T + b
    r_preds = rh @ w.T + h @ vw.T + vb

    m = preds.size
    g = (2.0 / m) * (preds - target_rows)
    rg = (2.0 / m) * r_preds

    # backward pass with tangents
    hv_w = [None] * n_layers
    hv_b = [None] * n_layers
    hv_w[-1] = rg.T @ hs[-1] + g.T @ rhs[-1]
    hv_b[-1] = rg.sum(axis=0)
    d_h = g @ w
    r_dh = rg @ w + g @ vw
    for l in range(n_layers - 2, -1, -1):
        w, _ = layers[l]
        vw, _ = dirs[l]
        act = hs[l + 1]
        r_act = rhs[l + 1]
        delta = d_h * (1.0 - act**2)
        r_delta = r_dh * (1.0 - act**2) - d_h * (2.0 * act * r_act)
        hv_w[l] = r_delta.T @ hs[l] + delta.T @ rhs[l]
        hv_b[l] = r_delta.sum(axis=0)
        d_h = delta @ w
        r_dh = r_delta @ w + delta @ vw

    hv = pack_params(list(zip(hv_w, hv_b)))
    return hv, r_dh, -rg


def backprop_to_synthetic(
    trace: UnrollTrace,
    d_theta_final: np.ndarray,
    direct_grads: SyntheticGradient,
) -> SyntheticGradient:
    """Accumulate the exact objective gradient w.r.t. the synthetic tensor.

    Walks the unroll backwards, carrying the parameter adjoint through each
    step and depositing the per-step contribution to the data. ``direct_grads``
    holds the paths that bypass the unroll (value terms evaluated on synthetic
    inputs, the diversity term); a zero-step trace returns them unchanged.
    """
    if d_theta_final.shape != trace.thetas[0].shape:
        raise ShapeMismatchError("adjoint and trace parameters disagree on shape")
    batch, d, t_in = trace.inputs.shape
    t_out = trace.targets.shape[2]
    d_inputs = direct_grads.d_inputs.copy()
    d_targets = direct_grads.d_targets.copy()
    adjoint = np.asarray(d_theta_final, dtype=np.float64).copy()
    for t in range(trace.k - 1, -1, -1):
        hv, r_dx, r_dy = _rop_inner_grad(
            trace.spec, trace.thetas[t], trace.inputs, trace.targets, adjoint
        )
        d_inputs -= trace.lr * r_dx.reshape(batch, d, t_in)
        d_targets -= trace.lr * r_dy.reshape(batch, d, t_out)
        adjoint = adjoint - trace.lr * hv
    return SyntheticGradient(d_inputs=d_inputs, d_targets=d_targets)


def finite_diff_synthetic(objective, synthetic: SyntheticDataset, h: float) -> SyntheticGradient:
    """Central-difference gradient of ``objective(dataset) -> float`` per entry.

    The independent oracle for the analytic meta-gradient: O(S*d*T) objective
    evaluations, no shared code with the reverse sweep.
    """
    if h <= 0:
        raise ValueError(f"h must be > 0, got {h}")
    base = synthetic.data
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        bumped = base.copy()
        bumped[idx] = base[idx] + h
        up = objective(SyntheticDataset(bumped, synthetic.t_in, synthetic.t_out))
        bumped[idx] = base[idx] - h
        down = objective(SyntheticDataset(bumped, synthetic.t_in, synthetic.t_out))
        grad[idx] = (up - down) / (2.0 * h)
    t_in = synthetic.t_in
    return SyntheticGradient(
        d_inputs=grad[:, :, :t_in].copy(), d_targets=grad[:, :, t_in:].copy()
    )
