"""Domain types shared across the package.

Permutations follow one orientation everywhere: ``p[i] = j`` means that
sample ``x_i`` is paired with sample ``y_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np


class SampleSet:
    """An ordered set of ``n`` real feature vectors of dimension ``d``.

    One-dimensional input is read as ``n`` scalar samples. The stored array
    is a read-only float64 copy.
    """

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"samples must be a 1-D or 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 2:
            raise ValueError(f"need at least 2 samples, got {arr.shape[0]}")
        if arr.shape[1] < 1:
            raise ValueError("samples must have dimension >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain non-finite values")
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def d(self) -> int:
        return self._data.shape[1]

    def __len__(self):
        return self.n

    def reorder(self, index) -> "SampleSet":
        return SampleSet(self._data[np.asarray(index)])

    def __repr__(self):
        return f"SampleSet(n={self.n}, d={self.d})"


def as_array(samples) -> np.ndarray:
    """Return the float64 ``(n, d)`` array behind ``samples``."""
    if isinstance(samples, SampleSet):
        return samples.data
    return SampleSet(samples).data


class Permutation:
    """A bijection on ``{0, ..., n-1}`` stored as an index array."""

    __slots__ = ("_map",)

    def __init__(self, mapping):
        arr = np.asarray(mapping)
        if arr.ndim != 1:
            raise ValueError("permutation must be a 1-D index array")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            as_int = arr.astype(np.int64)
            if not np.array_equal(as_int, arr):
                raise ValueError("permutation entries must be integers")
            arr = as_int
        arr = arr.astype(np.intp, copy=True)
        n = arr.size
        if n == 0:
            raise ValueError("permutation must be non-empty")
        seen = np.zeros(n, dtype=bool)
        if arr.min() < 0 or arr.max() >= n:
            raise ValueError(f"permutation entries must lie in [0, {n - 1}]")
        seen[arr] = True
        if not seen.all():
            raise ValueError("permutation is not a bijection (repeated index)")
        arr.setflags(write=False)
        self._map = arr

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(rng.permutation(n))

    @property
    def map(self) -> np.ndarray:
        return self._map

    @property
    def n(self) -> int:
        return self._map.size

    def __len__(self):
        return self._map.size

    def __getitem__(self, i):
        return self._map[i]

    def __iter__(self):
        return iter(self._map.tolist())

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self._map, other._map)

    def __hash__(self):
        return hash(self._map.tobytes())

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self._map)
        inv[self._map] = np.arange(self.n)
        return Permutation(inv)

    def tolist(self) -> list:
        return self._map.tolist()

    def __repr__(self):
        if self.n <= 12:
            return f"Permutation({self._map.tolist()})"
        return f"Permutation(n={self.n})"


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Return ``p o q``, i.e. ``result[i] = p[q[i]]``."""
    if p.n != q.n:
        raise ValueError(f"size mismatch: {p.n} vs {q.n}")
    return Permutation(p.map[q.map])


def inverse(p: Permutation) -> Permutation:
    return p.inverse()


def matched_accuracy(p: Permutation, truth: Permutation) -> float:
    """Fraction of indices on which ``p`` agrees with ``truth``."""
    if p.n != truth.n:
        raise ValueError(f"size mismatch: {p.n} vs {truth.n}")
    return float(np.count_nonzero(p.map == truth.map)) / p.n


class Measure(str, Enum):
    HSIC = "hsic"
    NOCCO = "nocco"
    LSMI = "lsmi"
    KSMI_SCORE = "ksmi"


@dataclass(frozen=True)
class DependenceModel:
    """A dependence measure together with its hyperparameters.

    ``epsilon`` is used by NOCCO only and ``lam`` by LSMI only.
    ``lambda_placement`` selects where LSMI's ridge term sits: ``"outside"``
    (default) adds ``lam * I`` after the ``1/n**2`` scaling of the Gram
    product, ``"inside"`` scales it by ``1/n**2`` as well.
    """

    measure: Measure
    sigma_x: float
    sigma_y: float
    epsilon: Optional[float] = None
    lam: Optional[float] = None
    lambda_placement: str = "outside"

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ValueError("kernel widths must be positive")
        if self.measure is Measure.NOCCO:
            if self.epsilon is None or not self.epsilon > 0:
                raise ValueError("NOCCO requires epsilon > 0")
        elif self.epsilon is not None:
            raise ValueError("epsilon is only used by NOCCO")
        if self.measure is Measure.LSMI:
            if self.lam is None or self.lam < 0:
                raise ValueError("LSMI requires lam >= 0")
        elif self.lam is not None:
            raise ValueError("lam is only used by LSMI")
        if self.lambda_placement not in ("inside", "outside"):
            raise ValueError("lambda_placement must be 'inside' or 'outside'")

    def to_dict(self) -> dict:
        return {
            "measure": self.measure.value,
            "sigma_x": self.sigma_x,
            "sigma_y": self.sigma_y,
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "lambda_placement": self.lambda_placement,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DependenceModel":
        return cls(
            measure=d["measure"],
            sigma_x=d["sigma_x"],
            sigma_y=d["sigma_y"],
            epsilon=d.get("epsilon"),
            lam=d.get("lambda"),
            lambda_placement=d.get("lambda_placement", "outside"),
        )


#: Width multipliers sqrt(1), ..., sqrt(10) used for initialization and CV.
DEFAULT_WIDTH_MULTIPLIERS = tuple(float(np.sqrt(k)) for k in range(1, 11))
DEFAULT_LAMBDAS = (1e-1, 1e-2, 1e-3)
DEFAULT_EPSILONS = (0.01, 0.05)


class InitKind(str, Enum):
    EIGEN = "eigen"
    RANDOM = "random"
    IDENTITY = "identity"


class SignChoice(str, Enum):
    POS = "pos"
    NEG = "neg"
    BOTH = "both"


@dataclass(frozen=True)
class MatchConfig:
    max_iterations: int = 20
    eta: float = 1.0
    n_restarts: int = 10
    width_multipliers: Sequence[float] = DEFAULT_WIDTH_MULTIPLIERS
    rng_seed: int = 0
    init: InitKind = InitKind.EIGEN
    sign_choice: SignChoice = SignChoice.BOTH
    exclude_self_distances: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "init", InitKind(self.init))
        object.__setattr__(self, "sign_choice", SignChoice(self.sign_choice))
        object.__setattr__(self, "width_multipliers", tuple(float(c) for c in self.width_multipliers))
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")
        if not self.width_multipliers or min(self.width_multipliers) <= 0:
            raise ValueError("width_multipliers must be non-empty and positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "eta": self.eta,
            "n_restarts": self.n_restarts,
            "width_multipliers": list(self.width_multipliers),
            "rng_seed": self.rng_seed,
            "init": self.init.value,
            "sign_choice": self.sign_choice.value,
            "exclude_self_distances": self.exclude_self_distances,
        }


@dataclass
class RestartTrace:
    restart: int
    width_multiplier: float
    init_score: float
    trace: list  # [(iteration, score)], one entry per LAP step
    converged: bool
    final_permutation: Permutation
    final_score: float


@dataclass
class MatchResult:
    permutation: Permutation
    score: float
    best_restart: int
    selected_model: DependenceModel
    converged: bool
    restarts: list = field(default_factory=list)
    config: Optional[MatchConfig] = None

    @property
    def score_trace(self) -> list:
        return [r.trace for r in self.restarts]
