"""CSV matrices, permutation files, synthetic data, and match-result JSON."""
from __future__ import annotations

import datetime as _dt
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import DependenceModel, MatchResult, Permutation, SampleSet

RESULT_SCHEMA = "cdom.match-result"
RESULT_SCHEMA_VERSION = 1


def _tool_version() -> str:
    from . import __version__

    return __version__


def atomic_write_text(path, text: str):
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_float(v: float) -> str:
    """Shortest round-tripping decimal form (``repr``), locale independent."""
    return repr(float(v))


# ---------------------------------------------------------------------------
# CSV


def load_matrix(path, delimiter: str = ",") -> np.ndarray:
    """Read a headerless numeric CSV into a 2-D float array."""
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(delimiter)
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} columns, found {len(cells)}")
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric cell in {line!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: empty file")
    return np.array(rows, dtype=np.float64)


def load_samples(path, delimiter: str = ",") -> SampleSet:
    return SampleSet(load_matrix(path, delimiter))


def save_matrix(m, path, delimiter: str = ","):
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    lines = [delimiter.join(format_float(v) for v in row) for row in m]
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_samples(s, path, delimiter: str = ","):
    data = s.data if isinstance(s, SampleSet) else np.asarray(s, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    save_matrix(data, path, delimiter)


def load_permutation(path) -> Permutation:
    """One integer per line; line ``i`` holds ``p[i]``. A match-result JSON also works."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return Permutation(json.loads(text)["permutation"])
    vals = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            vals.append(int(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: expected an integer, got {line!r}") from None
    if not vals:
        raise ValueError(f"{path}: empty file")
    return Permutation(vals)


def save_permutation(p: Permutation, path):
    atomic_write_text(path, "".join(f"{v}\n" for v in p.tolist()))


# ---------------------------------------------------------------------------
# synthetic data


def _shuffle(y_paired: np.ndarray, rng: np.random.Generator):
    n = y_paired.shape[0]
    order = rng.permutation(n)
    y = y_paired[order]
    truth = np.argsort(order)
    return y, Permutation(truth)


def gen_cubic(n: int = 100, seed: int = 0):
    """``x ~ U(-1, 1)``, ``y = x**3``, with ``y`` shuffled.

    Returns ``(x, y, truth)`` where ``y[truth[i]] == x[i]**3``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    y, truth = _shuffle(x**3, rng)
    return SampleSet(x), SampleSet(y), truth


def smooth_signals(n: int, d: int, rng: np.random.Generator, n_components: int = 3,
                   decay: float = 0.4, mirror: bool = False):
    """``n`` random low-frequency signals of length ``d``.

    Mode ``m`` alternates between an even cosine and an odd sine of rising
    frequency and has amplitude ``decay**m``, so the leading modes dominate
    (as in natural images). Coefficients are standard normal. With
    ``mirror=True`` only the even modes are used, so the right half is the
    reversed left half.
    """
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    t = np.arange(d) - (d - 1) / 2.0
    shapes = []
    for m in range(2 * n_components):
        k = m // 2 + 1
        if m % 2 == 0:
            shapes.append(np.cos(2 * np.pi * k * t / d))
        elif not mirror:
            shapes.append(np.sin(np.pi * (2 * k - 1) * t / d))
    basis = [f * decay**i for i, f in enumerate(shapes[:n_components])]
    coef = rng.standard_normal((n, len(basis)))
    return coef @ np.array(basis)


def gen_split_halves(
    n: int = 50,
    d: int = 20,
    noise: float = 0.02,
    seed: int = 0,
    n_components: int = 3,
    decay: float = 0.4,
    mirror: bool = False,
):
    """Split smooth random signals into left/right halves and shuffle the right.

    ``noise`` is the standard deviation of Gaussian noise added to the right
    halves (the leading mode has unit amplitude). Returns ``(x, y, truth)``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if d < 2 or d % 2:
        raise ValueError("d must be an even number >= 2")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    v = smooth_signals(n, d, rng, n_components, decay, mirror)
    half = d // 2
    x, right = v[:, :half], v[:, half:]
    if mirror:
        right = right[:, ::-1]
    if noise > 0:
        right = right + noise * rng.standard_normal(right.shape)
    y, truth = _shuffle(right, rng)
    return SampleSet(x), SampleSet(y), truth


def gen_color_clusters(n: int = 320, n_clusters: int = 6, spread: float = 6.0, seed: int = 0, dim: int = 3):
    """Lab-like color features drawn around ``n_clusters`` random centers."""
    rng = np.random.default_rng(seed)
    centers = np.column_stack(
        [
            rng.uniform(20, 90, n_clusters),
            rng.uniform(-60, 60, (n_clusters, dim - 1)),
        ]
    )
    labels = rng.integers(0, n_clusters, n)
    feats = centers[labels] + spread * rng.standard_normal((n, dim))
    return SampleSet(feats), labels


# ---------------------------------------------------------------------------
# match results


def _restart_dict(rt) -> dict:
    return {
        "restart": rt.restart,
        "width_multiplier": rt.width_multiplier,
        "init_score": rt.init_score,
        "trace": [[int(t), float(s)] for t, s in rt.trace],
        "converged": bool(rt.converged),
        "final_score": rt.final_score,
        "permutation": rt.final_permutation.tolist(),
    }


def match_result_to_dict(r: MatchResult, extra: dict | None = None, timestamp: bool = True) -> dict:
    doc = {
        "schema": RESULT_SCHEMA,
        "schema_version": RESULT_SCHEMA_VERSION,
        "tool_version": _tool_version(),
        "permutation": r.permutation.tolist(),
        "score": float(r.score),
        "best_restart": int(r.best_restart),
        "converged": bool(r.converged),
        "selected_model": {k: (None if v is None else (float(v) if not isinstance(v, str) else v))
                           for k, v in r.selected_model.to_dict().items()},
        "restarts": [_restart_dict(rt) for rt in r.restarts],
        "config": r.config.to_dict() if r.config is not None else {},
    }
    if extra:
        doc.update(extra)
    if timestamp:
        doc["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return doc


def dumps_result(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_match_result(r: MatchResult, path, extra: dict | None = None, timestamp: bool = True):
    atomic_write_text(path, dumps_result(match_result_to_dict(r, extra, timestamp)))


def load_match_result(path) -> dict:
    """Load a result file; ``permutation`` is returned as a :class:`Permutation`."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != RESULT_SCHEMA:
        raise ValueError(f"{path}: not a {RESULT_SCHEMA} file")
    doc["permutation"] = Permutation(doc["permutation"])
    doc["selected_model"] = DependenceModel.from_dict(doc["selected_model"])
    return doc


def schema_path() -> Path:
    return Path(__file__).with_name("schema") / "match_result.schema.json"
