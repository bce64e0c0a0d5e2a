"""Multi-output Gaussian kernel ridge regression.

The fitted map is ``f(x) = W^T k(x)`` with ``k(x)[j] = exp(-|x - c_j|^2 / (2 tau^2))``
over the training centers ``c_j``. ``W`` minimizes

    sum_i |y_i - W^T k(c_i)|^2 + (delta / 2) tr(W^T W)

whose stationarity condition is ``(G^T G + (delta/2) I) W = G^T Y`` for the
symmetric Gram matrix ``G`` of the centers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .core import DEFAULT_WIDTH_MULTIPLIERS, as_array
from .dependence import fold_indices
from .kernels import gaussian_cross, gaussian_gram, median_width

FORMAT = "cdom.kernel-regressor"
FORMAT_VERSION = 1

DEFAULT_DELTAS = (1.0, 1e-1, 1e-2, 1e-3)


def _targets(y) -> np.ndarray:
    y = np.asarray(getattr(y, "data", y), dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2 or not np.all(np.isfinite(y)):
        raise ValueError("targets must be a finite 2-D array")
    return y


@dataclass(frozen=True)
class KernelRegressor:
    centers: np.ndarray
    weights: np.ndarray
    tau: float
    delta: float

    def __post_init__(self):
        if self.centers.shape[0] != self.weights.shape[0]:
            raise ValueError("centers and weights disagree on n")

    @property
    def d_in(self) -> int:
        return self.centers.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[1]

    def features(self, x) -> np.ndarray:
        x = as_array(x)
        if x.shape[1] != self.d_in:
            raise ValueError(f"input dimension {x.shape[1]} does not match model ({self.d_in})")
        return gaussian_cross(x, self.centers, self.tau)

    def predict(self, x) -> np.ndarray:
        return self.features(x) @ self.weights

    def objective(self, y) -> float:
        """The training objective at the stored weights."""
        return objective(self.weights, gaussian_gram(self.centers, self.tau).gram, _targets(y), self.delta)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "tau": float(self.tau),
            "delta": float(self.delta),
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "KernelRegressor":
        if doc.get("format") != FORMAT:
            raise ValueError(f"not a {FORMAT} document")
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported {FORMAT} version {doc.get('version')!r}")
        centers = np.array(doc["centers"], dtype=np.float64, ndmin=2)
        weights = np.array(doc["weights"], dtype=np.float64, ndmin=2)
        return cls(centers, weights, float(doc["tau"]), float(doc["delta"]))


def objective(w: np.ndarray, g: np.ndarray, y: np.ndarray, delta: float) -> float:
    r = y - g @ w
    return float(np.sum(r * r) + 0.5 * delta * np.sum(w * w))


def gradient(w: np.ndarray, g: np.ndarray, y: np.ndarray, delta: float) -> np.ndarray:
    return -2.0 * g.T @ (y - g @ w) + delta * w


def _solve(g: np.ndarray, y: np.ndarray, delta: float) -> np.ndarray:
    # G is symmetric, so G^T G + (delta/2) I shares its eigenvectors.
    mu, v = linalg.eigh(g)
    denom = mu * mu + 0.5 * delta
    if delta == 0:
        top = np.max(np.abs(mu))
        if top == 0 or np.min(np.abs(mu)) <= g.shape[0] * np.finfo(float).eps * top:
            raise ValueError("normal equations are singular; use delta > 0")
    return v @ ((mu / denom)[:, None] * (v.T @ y))


def fit(xm, ym, tau: float, delta: float) -> KernelRegressor:
    """Closed-form fit on matched pairs ``(xm[i], ym[i])``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    x = as_array(xm)
    y = _targets(ym)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"sample counts differ: {x.shape[0]} vs {y.shape[0]}")
    g = gaussian_gram(x, tau).gram
    w = _solve(g, y, delta)
    return KernelRegressor(x.copy(), w, float(tau), float(delta))


def default_tau_grid(xm, multipliers: Sequence[float] = DEFAULT_WIDTH_MULTIPLIERS) -> list:
    m = median_width(xm)
    return [c * m for c in multipliers]


def cv_errors(xm, ym, tau_grid, delta_grid, folds: int = 2, seed: int = 0) -> list:
    """Mean held-out squared error per ``(tau, delta)``, tau outer, delta inner.

    A candidate whose normal equations are singular on some fold scores ``inf``.
    """
    if not len(tau_grid) or not len(delta_grid):
        raise ValueError("empty hyperparameter grid")
    x = as_array(xm)
    y = _targets(ym)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError(f"sample counts differ: {n} vs {y.shape[0]}")
    if folds < 2 or n < 2 * folds:
        raise ValueError(f"need folds >= 2 and n >= 2*folds (n={n}, folds={folds})")
    splits = fold_indices(n, folds, seed)
    out = []
    for tau in tau_grid:
        errs = np.zeros(len(delta_grid))
        for te in splits:
            tr = np.setdiff1d(np.arange(n), te, assume_unique=True)
            g = gaussian_gram(x[tr], tau).gram
            cross = gaussian_cross(x[te], x[tr], tau)
            for a, delta in enumerate(delta_grid):
                try:
                    w = _solve(g, y[tr], delta)
                except ValueError:
                    errs[a] = np.inf
                    continue
                r = y[te] - cross @ w
                errs[a] += np.mean(np.sum(r * r, axis=1))
        out.extend(((float(tau), float(d)), e / folds) for d, e in zip(delta_grid, errs))
    return out


def fit_cv(xm, ym, tau_grid=None, delta_grid=DEFAULT_DELTAS, folds: int = 2, seed: int = 0) -> KernelRegressor:
    """Pick ``(tau, delta)`` by k-fold CV, then refit on all pairs.

    ``tau_grid`` defaults to the median-heuristic width times ``sqrt(1..10)``.
    Ties go to the first candidate in grid order.
    """
    if tau_grid is None:
        tau_grid = default_tau_grid(xm)
    scores = cv_errors(xm, ym, tau_grid, delta_grid, folds, seed)
    best = min(range(len(scores)), key=lambda i: (scores[i][1], i))
    if not np.isfinite(scores[best][1]):
        raise ValueError("every candidate was singular; include a positive delta")
    tau, delta = scores[best][0]
    return fit(xm, ym, tau, delta)
