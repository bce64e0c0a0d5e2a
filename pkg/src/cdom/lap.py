"""Exact linear assignment (maximize total profit).

The solver is a shortest augmenting path method with dual potentials
(Jonker-Volgenant family), O(n^3). A compiled kernel is used when it was
built; otherwise a numpy port of the same algorithm runs. Set
``CDOM_LAP_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import math
import os

import numpy as np

from . import _lap_py
from .core import Permutation

try:
    from . import _lap_ext
except ImportError:  # extension not built
    _lap_ext = None

BACKENDS = {"python": _lap_py.solve_min_cost}
if _lap_ext is not None:
    BACKENDS["native"] = _lap_ext.solve_min_cost


def default_backend() -> str:
    want = os.environ.get("CDOM_LAP_BACKEND", "").strip().lower()
    if want:
        if want not in BACKENDS:
            raise RuntimeError(f"LAP backend {want!r} unavailable; have {sorted(BACKENDS)}")
        return want
    return "native" if "native" in BACKENDS else "python"


def _check_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"profit matrix must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise ValueError("profit matrix is empty")
    if not np.all(np.isfinite(m)):
        raise ValueError("profit matrix contains non-finite entries")
    return m


def assignment_value(profit, p: Permutation) -> float:
    """Correctly rounded ``sum_i profit[i, p[i]]``."""
    profit = np.asarray(profit, dtype=np.float64)
    return math.fsum(profit[np.arange(p.n), p.map].tolist())


def solve_lap(profit, backend: str | None = None) -> tuple[Permutation, float]:
    """Return the permutation maximizing ``sum_i profit[i, pi(i)]`` and that value."""
    profit = _check_square(profit)
    solver = BACKENDS[backend or default_backend()]
    col4row = solver(-profit)
    p = Permutation(col4row)
    return p, assignment_value(profit, p)


def solve_lap_min(cost, backend: str | None = None) -> tuple[Permutation, float]:
    """Minimum-cost variant (used by the CLI for cost matrices)."""
    cost = _check_square(cost)
    solver = BACKENDS[backend or default_backend()]
    p = Permutation(solver(cost))
    return p, assignment_value(cost, p)
