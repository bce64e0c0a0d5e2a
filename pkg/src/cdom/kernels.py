"""Gaussian Gram matrices, centering, NOCCO normalization, width heuristic."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist, squareform

from .core import as_array


@dataclass(frozen=True)
class KernelMatrix:
    gram: np.ndarray


@dataclass(frozen=True)
class CenteredKernelMatrix:
    gram: np.ndarray


@dataclass(frozen=True)
class NormalizedKernelMatrix:
    gram: np.ndarray
    epsilon: float


def gram_of(k) -> np.ndarray:
    """Unwrap any of the kernel-matrix types, or pass an array through."""
    g = getattr(k, "gram", k)
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {g.shape}")
    return g


def sq_distances(samples) -> np.ndarray:
    """Symmetric matrix of squared Euclidean distances (exact zeros on the diagonal)."""
    x = as_array(samples)
    return squareform(pdist(x, "sqeuclidean"))


def _check_sigma(sigma):
    if not np.isfinite(sigma) or sigma <= 0:
        raise ValueError(f"kernel width must be a positive finite number, got {sigma}")


def gaussian_gram(samples, sigma: float) -> KernelMatrix:
    """``K[i, j] = exp(-||x_i - x_j||^2 / (2 sigma^2))``."""
    _check_sigma(sigma)
    return KernelMatrix(np.exp(-sq_distances(samples) / (2.0 * sigma * sigma)))


def gaussian_cross(a, b, sigma: float) -> np.ndarray:
    """Rectangular Gaussian kernel block between the rows of ``a`` and ``b``."""
    _check_sigma(sigma)
    return np.exp(-cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean") / (2.0 * sigma * sigma))


def center(k) -> CenteredKernelMatrix:
    """Double-center a square matrix, ``G K G`` with ``G = I - 11^T / n``."""
    g = gram_of(k)
    row = g.mean(axis=1, keepdims=True)
    col = g.mean(axis=0, keepdims=True)
    c = g - row - col + g.mean()
    return CenteredKernelMatrix(c)


def nocco_normalize(kbar, epsilon: float) -> NormalizedKernelMatrix:
    """Return ``Kbar (Kbar + n eps I)^-1`` via a Cholesky solve."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    g = gram_of(kbar)
    n = g.shape[0]
    a = g + n * epsilon * np.eye(n)
    try:
        factor = linalg.cho_factor(a, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise ValueError("NOCCO normalization failed: Kbar + n*eps*I is not positive definite") from exc
    # X a = g  <=>  a X^T = g  (a, g symmetric)
    out = linalg.cho_solve(factor, g).T
    return NormalizedKernelMatrix(np.ascontiguousarray(out), float(epsilon))


def median_width(samples, exclude_self: bool = False) -> float:
    """Median heuristic width ``2**-0.5 * median{||x_i - x_j||}``.

    By default the median runs over all ``n**2`` ordered pairs, zero
    self-distances included. ``exclude_self=True`` uses only ``i != j``.
    """
    x = as_array(samples)
    d = np.sqrt(sq_distances(x))
    if exclude_self:
        vals = d[~np.eye(d.shape[0], dtype=bool)]
    else:
        vals = d.ravel()
    med = float(np.median(vals))
    if not med > 0:
        raise ValueError("degenerate width: median pairwise distance is zero")
    return med / np.sqrt(2.0)
