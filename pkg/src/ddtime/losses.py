"""Scalar objectives for distillation.

Covers the temporal and frequency prediction-consistency terms and their
blend, the pairwise-diversity surrogate over synthetic samples, the
normalized parameter-matching loss, and the weighted total. Everything is a
pure function of its arguments; gradients needed by the outer loop live in
``_isib_loss_and_grad`` and the spectral helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSegmentError, InvalidDistributionError, ShapeMismatchError
from .models import param_sq_distance
from .spectral import spectral_l1_rows_grad


@dataclass(frozen=True)
class IsibConfig:
    """Knobs for the inter-sample diversity term."""

    tau: float = 1.0
    epsilon: float = 1e-8
    lambda_div: float = 0.5

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.lambda_div <= 0:
            raise ValueError(f"lambda_div must be > 0, got {self.lambda_div}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term objective values; ``total`` is recomputable from the parts."""

    l_param: float
    l_val_tmp: float
    l_val_fre: float
    l_is: float
    alpha: float
    lambda_is: float
    total: float

    def recompute_total(self) -> float:
        return (
            self.l_param
            + (1.0 - self.alpha) * self.l_val_tmp
            + self.alpha * self.l_val_fre
            + self.lambda_is * self.l_is
        )


def value_temporal(y_s: np.ndarray, y_t: np.ndarray) -> float:
    """Mean squared difference over all entries."""
    y_s = np.asarray(y_s, dtype=np.float64)
    y_t = np.asarray(y_t, dtype=np.float64)
    if y_s.shape != y_t.shape:
        raise ShapeMismatchError(f"shape mismatch: {y_s.shape} vs {y_t.shape}")
    return float(((y_s - y_t) ** 2).mean())


def value_frequency(y_s: np.ndarray, y_t: np.ndarray) -> float:
    """Mean over variables of the spectral L1 distance between prediction rows."""
    y_s = np.asarray(y_s, dtype=np.float64)
    y_t = np.asarray(y_t, dtype=np.float64)
    if y_s.shape != y_t.shape:
        raise ShapeMismatchError(f"shape mismatch: {y_s.shape} vs {y_t.shape}")
    rows = (y_s - y_t).reshape(-1, y_s.shape[-1])
    per_row, _ = spectral_l1_rows_grad(rows)
    return float(per_row.mean())


def value_combined(y_s: np.ndarray, y_t: np.ndarray, alpha: float) -> float:
    """Convex blend ``(1-alpha)*temporal + alpha*frequency``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return (1.0 - alpha) * value_temporal(y_s, y_t) + alpha * value_frequency(y_s, y_t)


def sample_probabilities(x: np.ndarray, cfg: IsibConfig) -> np.ndarray:
    """Flatten a sample, standardize it, divide by tau, and softmax.

    A constant sample standardizes to all-zero logits and therefore maps to
    the uniform distribution.
    """
    flat = np.asarray(x, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ShapeMismatchError("sample is empty")
    mu = flat.mean()
    sigma = flat.std()
    z = (flat - mu) / ((sigma + cfg.epsilon) * cfg.tau)
    z -= z.max()  # stabilize exp
    e = np.exp(z)
    return e / e.sum()


def sym_kl(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric KL ``0.5 * sum (p-q) * ln(p/q)`` (natural log)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeMismatchError(f"length mismatch: {p.shape} vs {q.shape}")
    if (p <= 0).any() or (q <= 0).any():
        raise InvalidDistributionError("probabilities must be strictly positive")
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise InvalidDistributionError("probabilities must each sum to 1")
    return float(0.5 * ((p - q) * np.log(p / q)).sum())


def _sample_matrix(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim < 2:
        raise ShapeMismatchError("expected a list of samples or an [S, ...] array")
    return arr.reshape(arr.shape[0], -1)


def _probability_rows(flat: np.ndarray, cfg: IsibConfig) -> np.ndarray:
    mu = flat.mean(axis=1, keepdims=True)
    sigma = flat.std(axis=1, keepdims=True)
    z = (flat - mu) / ((sigma + cfg.epsilon) * cfg.tau)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def isib_loss(samples, cfg: IsibConfig) -> float:
    """Mean over unordered sample pairs of ``exp(-lambda_div * symKL)``.

    Equal samples give the maximum value 1; a single sample gives 0 by
    convention (no pairs to compare).
    """
    flat = _sample_matrix(samples)
    s = flat.shape[0]
    if s < 1:
        raise ValueError("need at least one sample")
    if s == 1:
        return 0.0
    probs = _probability_rows(flat, cfg)
    total = 0.0
    for i in range(s):
        for j in range(i + 1, s):
            total += math.exp(-cfg.lambda_div * sym_kl(probs[i], probs[j]))
    return total / (s * (s - 1) / 2)


def mean_sym_kl(samples, cfg: IsibConfig) -> float:
    """Raw mean pairwise symmetric KL across samples (logging / diversity)."""
    flat = _sample_matrix(samples)
    s = flat.shape[0]
    if s < 2:
        raise ValueError("need at least two samples")
    probs = _probability_rows(flat, cfg)
    total = 0.0
    for i in range(s):
        for j in range(i + 1, s):
            total += sym_kl(probs[i], probs[j])
    return total / (s * (s - 1) / 2)


def param_match_loss(
    theta_s: np.ndarray, theta_start: np.ndarray, theta_target: np.ndarray
) -> float:
    """Squared distance to the target, normalized by the segment length."""
    denom = param_sq_distance(theta_target, theta_start)
    if denom <= 0.0:
        raise DegenerateSegmentError("theta_target equals theta_start")
    return param_sq_distance(theta_s, theta_target) / denom


def total_loss(
    l_param: float,
    l_val_tmp: float,
    l_val_fre: float,
    l_is: float,
    alpha: float,
    lambda_is: float,
) -> LossBreakdown:
    """Weighted sum of the four terms."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if lambda_is < 0.0:
        raise ValueError(f"lambda_is must be >= 0, got {lambda_is}")
    # same expression as recompute_total, so the stored value matches bit-exactly
    total = l_param + (1.0 - alpha) * l_val_tmp + alpha * l_val_fre + lambda_is * l_is
    return LossBreakdown(
        l_param=l_param,
        l_val_tmp=l_val_tmp,
        l_val_fre=l_val_fre,
        l_is=l_is,
        alpha=alpha,
        lambda_is=lambda_is,
        total=total,
    )


def _isib_loss_and_grad(samples: np.ndarray, cfg: IsibConfig) -> tuple[float, np.ndarray]:
    """Diversity surrogate plus its exact gradient w.r.t. the raw samples.

    The chain runs loss -> pairwise symKL -> softmax -> per-sample
    standardization; the standardization backward uses
    ``du = (g - mean(g))/(tau*s) - (g.w) w / (tau * s^2 * n * sigma)`` with
    ``w = u - mu`` and ``s = sigma + eps`` (the second term vanishes
    continuously as sigma -> 0).
    """
    arr = np.asarray(samples, dtype=np.float64)
    shape = arr.shape
    flat = arr.reshape(shape[0], -1)
    s, n = flat.shape
    if s == 1:
        return 0.0, np.zeros(shape)
    probs = _probability_rows(flat, cfg)
    log_p = np.log(probs)
    n_pairs = s * (s - 1) // 2
    loss = 0.0
    d_probs = np.zeros_like(probs)
    for i in range(s):
        for j in range(i + 1, s):
            diff_log = log_p[i] - log_p[j]
            kl = 0.5 * ((probs[i] - probs[j]) * diff_log).sum()
            term = math.exp(-cfg.lambda_div * kl)
            loss += term
            scale = -cfg.lambda_div * term / n_pairs
            d_probs[i] += scale * 0.5 * (diff_log + 1.0 - probs[j] / probs[i])
            d_probs[j] += scale * 0.5 * (-diff_log + 1.0 - probs[i] / probs[j])
    loss /= n_pairs

    # softmax backward: dz = p * (dp - <dp, p>)
    inner = (d_probs * probs).sum(axis=1, keepdims=True)
    d_z = probs * (d_probs - inner)

    mu = flat.mean(axis=1, keepdims=True)
    sigma = flat.std(axis=1, keepdims=True)
    scale = (sigma + cfg.epsilon) * cfg.tau
    centered = flat - mu
    d_flat = (d_z - d_z.mean(axis=1, keepdims=True)) / scale
    coupling = (d_z * centered).sum(axis=1, keepdims=True)
    safe_sigma = np.where(sigma > 0.0, sigma, 1.0)
    d_flat -= np.where(
        sigma > 0.0,
        coupling * centered / (cfg.tau * (sigma + cfg.epsilon) ** 2 * n * safe_sigma),
        0.0,
    )
    return loss, d_flat.reshape(shape)
