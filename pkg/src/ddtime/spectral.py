"""Direct discrete Fourier transform and the spectral distance between predictions.

The forward transform is the plain unnormalized sum
``X_k = sum_n x_n * exp(-2*pi*i*k*n/T)``, evaluated through a cached T×T
matrix. Horizons here are tiny (tens of steps), so the O(T^2) product is
both fast enough and trivially auditable; the same matrix doubles as the
Jacobian when the losses need gradients of the spectral distance.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatchError

_MATRIX_CACHE: dict[int, np.ndarray] = {}


def dft_matrix(t: int) -> np.ndarray:
    """Complex ``[T, T]`` matrix with entries exp(-2*pi*i*k*n/T)."""
    mat = _MATRIX_CACHE.get(t)
    if mat is None:
        k = np.arange(t)
        mat = np.exp(-2j * np.pi * np.outer(k, k) / t)
        _MATRIX_CACHE[t] = mat
    return mat


def dft(sequence: np.ndarray) -> np.ndarray:
    """Forward DFT of a real vector; returns complex coefficients of length T."""
    x = np.asarray(sequence, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ShapeMismatchError(f"dft expects a 1-D vector, got shape {x.shape}")
    return dft_matrix(x.size) @ x


def dft_rows(rows: np.ndarray) -> np.ndarray:
    """Row-wise DFT of a ``[R, T]`` real array."""
    rows = np.asarray(rows, dtype=np.float64)
    return rows @ dft_matrix(rows.shape[-1]).T


def spectral_l1(a: np.ndarray, b: np.ndarray) -> float:
    """Sum over bins of the complex modulus of the coefficient difference."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(dft(a - b)).sum())


def power_spectrum(sequence: np.ndarray) -> np.ndarray:
    """Per-bin power ``|X_k|^2 / T``."""
    coeffs = dft(sequence)
    return (np.abs(coeffs) ** 2) / coeffs.size


def spectral_l1_rows_grad(diff_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row spectral L1 of ``a-b`` rows plus its gradient w.r.t. those rows.

    For ``L_r = sum_k |C @ d_r|_k`` the gradient is ``Re(C^T conj(F/|F|))``;
    bins with exactly zero modulus contribute the zero subgradient.
    """
    rows = np.asarray(diff_rows, dtype=np.float64)
    mat = dft_matrix(rows.shape[-1])
    coeffs = rows @ mat.T
    modulus = np.abs(coeffs)
    unit = np.zeros_like(coeffs)
    nonzero = modulus > 0.0
    unit[nonzero] = coeffs[nonzero] / modulus[nonzero]
    grad = (np.conj(unit) @ mat).real
    return modulus.sum(axis=1), grad
