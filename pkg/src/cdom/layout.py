"""Arrange feature vectors on a 2-D grid frame by dependence maximization."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import DependenceModel, MatchConfig, MatchResult, Permutation, SampleSet
from .matcher import LsomCV, run_match


@dataclass(frozen=True)
class GridFrame:
    """Occupied cell centers ``(row, col)`` on a unit-spaced grid."""

    coords: np.ndarray
    source: str

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] == 0:
            raise ValueError("coords must be a non-empty n x 2 array")
        if len({tuple(r) for r in c.tolist()}) != c.shape[0]:
            raise ValueError("frame cells must be distinct")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def shape(self) -> tuple:
        """Bounding-box size ``(rows, cols)``."""
        return tuple(int(v) + 1 for v in self.coords.max(axis=0))


def rect_frame(rows: int, cols: int) -> GridFrame:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    r, c = np.divmod(np.arange(rows * cols), cols)
    return GridFrame(np.column_stack([r, c]), f"rect:{rows}x{cols}")


def mask_frame(mask_text: str) -> GridFrame:
    """Frame from a text mask of ``#`` (occupied) and ``.`` (empty) cells.

    Blank lines at the ends are ignored; every other line must have the same
    width.
    """
    lines = [ln.rstrip("\r") for ln in mask_text.strip("\n").split("\n")]
    lines = [ln.rstrip() for ln in lines]
    if not lines or not any(lines):
        raise ValueError("empty frame")
    width = len(lines[0])
    cells = []
    for r, ln in enumerate(lines):
        if len(ln) != width:
            raise ValueError(f"mask line {r + 1} has width {len(ln)}, expected {width}")
        bad = set(ln) - {"#", "."}
        if bad:
            raise ValueError(f"mask line {r + 1}: illegal characters {''.join(sorted(bad))!r}")
        cells.extend((r, c) for c, ch in enumerate(ln) if ch == "#")
    if not cells:
        raise ValueError("empty frame")
    return GridFrame(np.array(cells), "mask")


def neighbor_pairs(frame: GridFrame) -> np.ndarray:
    """Index pairs ``(a, b)``, ``a < b``, of occupied cells that are 4-neighbours."""
    index = {tuple(map(int, rc)): i for i, rc in enumerate(frame.coords)}
    pairs = []
    for (r, c), i in index.items():
        for rc in ((r + 1, c), (r, c + 1)):
            j = index.get(rc)
            if j is not None:
                pairs.append((min(i, j), max(i, j)))
    return np.array(sorted(pairs), dtype=np.intp).reshape(-1, 2)


def locality(features, frame: GridFrame, cell_to_feature) -> float:
    """Mean feature distance between 4-neighbour cells (lower = more local).

    Returns 0 for frames without neighbouring cells.
    """
    f = np.asarray(getattr(features, "data", features), dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    a = np.asarray(getattr(cell_to_feature, "map", cell_to_feature))
    pairs = neighbor_pairs(frame)
    if pairs.size == 0:
        return 0.0
    diff = f[a[pairs[:, 0]]] - f[a[pairs[:, 1]]]
    return float(np.mean(np.sqrt(np.sum(diff * diff, axis=1))))


def random_locality(features, frame: GridFrame, trials: int = 100, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.array([locality(features, frame, rng.permutation(frame.n)) for _ in range(trials)])


@dataclass
class Layout:
    cell_to_feature: Permutation
    locality: float
    match: Optional[MatchResult]

    def rows(self, frame: GridFrame) -> list:
        """``(cell_row, cell_col, feature_index)`` per occupied cell."""
        return [
            (int(r), int(c), int(f))
            for (r, c), f in zip(frame.coords, self.cell_to_feature.map)
        ]


def summarize(
    features,
    frame: GridFrame,
    model: Union[DependenceModel, LsomCV, None] = None,
    cfg: MatchConfig = MatchConfig(),
) -> Layout:
    """Place each feature vector on one frame cell, maximizing dependence.

    ``model`` defaults to LSMI with cross-validated hyperparameters.
    """
    x = np.asarray(getattr(features, "data", features), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != frame.n:
        raise ValueError(
            f"frame size must equal image count ({frame.n} cells, {x.shape[0]} images)"
        )
    if frame.n == 1:
        only = Permutation.identity(1)
        return Layout(only, 0.0, None)
    result = run_match(SampleSet(x), SampleSet(frame.coords), model or LsomCV(), cfg)
    cell_to_feature = result.permutation.inverse()
    return Layout(cell_to_feature, locality(x, frame, cell_to_feature), result)
