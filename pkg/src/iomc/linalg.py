"""Dense SVD kernels: thin SVD, singular value soft-thresholding and
best rank-k truncation.

All routines take and return ``numpy.ndarray`` (float64). The SVD itself is
delegated to LAPACK through :func:`numpy.linalg.svd`; the contract checked by
the tests is accuracy (orthonormal factors, 1e-8 relative reconstruction),
not the algorithm.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import SanitizationError

# Singular values below RANK_RTOL * sigma_1 count as zero.
RANK_RTOL = 1e-12


class SvdFactors(NamedTuple):
    """Thin SVD ``m = u @ diag(s) @ v.T`` with ``r = min(m.shape)`` factors."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.T


def as_matrix(m, *, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite, non-empty 2-D float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise SanitizationError(f"{name} contains NaN or infinite entries")
    return a


def svd(m) -> SvdFactors:
    a = as_matrix(m)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(u, s, vt.T)


def singular_values(m) -> np.ndarray:
    """Singular values of ``m``, non-increasing."""
    return np.linalg.svd(as_matrix(m), compute_uv=False)


def numerical_rank(m, rtol: float = RANK_RTOL) -> int:
    s = singular_values(m)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def nuclear_norm(m) -> float:
    return float(singular_values(m).sum())


def soft_threshold_svd(y, lam: float) -> np.ndarray:
    """Shrink every singular value of ``y`` by ``lam`` and clip at zero.

    Returns ``U diag((s - lam)_+) V^T``. Only triplets with ``s > lam``
    enter the product. Rows and columns of ``y`` that are exactly zero are
    removed before factorizing and come back as exact zeros, which is what
    the reconstruction of a fully unobserved row relies on.

    Parameters
    ----------
    y : array_like, shape (m, n)
    lam : float
        Threshold, must be non-negative.

    Returns
    -------
    numpy.ndarray, shape (m, n)
    """
    if lam < 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be a finite non-negative number, got {lam}")
    a = as_matrix(y, name="y")
    out = np.zeros_like(a)
    rows = np.flatnonzero(np.any(a != 0.0, axis=1))
    cols = np.flatnonzero(np.any(a != 0.0, axis=0))
    if rows.size == 0:
        return out
    sub = a[np.ix_(rows, cols)]
    u, s, vt = np.linalg.svd(sub, full_matrices=False)
    keep = s > lam
    if not np.any(keep):
        return out
    shrunk = s[keep] - lam
    out[np.ix_(rows, cols)] = (u[:, keep] * shrunk) @ vt[keep]
    return out


def truncated_rank_k(m, k: int) -> tuple[np.ndarray, float]:
    """Best rank-``k`` approximation of ``m`` and its per-entry RMSE.

    The RMSE is ``sqrt(sum_{i>k} s_i**2) / sqrt(rows * cols)``, i.e. the
    Frobenius distance to ``m`` divided by ``sqrt(m.size)``.
    """
    a = as_matrix(m)
    if isinstance(k, bool) or int(k) != k:
        raise ValueError(f"k must be an integer, got {k!r}")
    k = int(k)
    if k < 0 or k > min(a.shape):
        raise ValueError(f"k must lie in [0, {min(a.shape)}], got {k}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    approx = (u[:, :k] * s[:k]) @ vt[:k]
    rmse_k = float(np.sqrt(np.sum(s[k:] ** 2)) / np.sqrt(a.size))
    return approx, rmse_k
