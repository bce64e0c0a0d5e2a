"""Permutation optimization by iterated linear assignment.

Each step linearizes the (convex, for HSIC/NOCCO) objective
``tr(K P^T L P)`` at the current pairing and solves the resulting linear
assignment problem exactly. Restarts come from the eigenvector-sorting
initialization at several kernel widths.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .core import (
    DEFAULT_LAMBDAS,
    DEFAULT_WIDTH_MULTIPLIERS,
    DependenceModel,
    InitKind,
    MatchConfig,
    MatchResult,
    Measure,
    Permutation,
    RestartTrace,
    SignChoice,
    as_array,
)
from .dependence import GramCache, hsic, lsmi_cv_select, lsmi_fit, nocco_score, permuted
from .kernels import center, gaussian_gram, median_width, nocco_normalize
from .lap import assignment_value, solve_lap


@dataclass(frozen=True)
class LsomCV:
    """LSMI with hyperparameters re-selected by cross-validation at every step."""

    width_multipliers: Sequence[float] = DEFAULT_WIDTH_MULTIPLIERS
    lambdas: Sequence[float] = DEFAULT_LAMBDAS
    folds: int = 2
    lambda_placement: str = "outside"

    def to_dict(self) -> dict:
        return {
            "measure": "lsmi",
            "cv": True,
            "width_multipliers": list(self.width_multipliers),
            "lambdas": list(self.lambdas),
            "folds": self.folds,
            "lambda_placement": self.lambda_placement,
        }


# ---------------------------------------------------------------------------
# initialization


def align_orders(f: np.ndarray, g: np.ndarray) -> Permutation:
    """Pair the k-th smallest entry of ``f`` with the k-th smallest of ``g``."""
    f, g = np.asarray(f), np.asarray(g)
    if f.shape != g.shape:
        raise ValueError("f and g must have the same length")
    p = np.empty(f.size, dtype=np.intp)
    p[np.argsort(f, kind="stable")] = np.argsort(g, kind="stable")
    return Permutation(p)


def principal_eigenvector(m: np.ndarray) -> np.ndarray:
    """Top eigenvector, sign fixed so its largest-magnitude entry is positive."""
    n = m.shape[0]
    try:
        _, vec = linalg.eigh(m, subset_by_index=[n - 1, n - 1])
    except linalg.LinAlgError as exc:
        raise ValueError("eigensolver failed during initialization") from exc
    v = vec[:, 0]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


def eigen_init(
    x,
    y,
    c: float,
    sign: SignChoice = SignChoice.POS,
    widths: Optional[tuple] = None,
    exclude_self: bool = False,
) -> Permutation:
    """Sort-alignment of the principal eigenvectors of the centered Gram matrices.

    Widths are ``c * (m_x, m_y)`` with the median heuristic ``m``; pass
    ``widths`` to reuse precomputed ``(m_x, m_y)``.
    """
    if not c > 0:
        raise ValueError("width multiplier must be positive")
    sign = SignChoice(sign)
    x, y = as_array(x), as_array(y)
    if widths is None:
        widths = (median_width(x, exclude_self), median_width(y, exclude_self))
    kbar = center(gaussian_gram(x, c * widths[0])).gram
    lbar = center(gaussian_gram(y, c * widths[1])).gram
    f = principal_eigenvector(kbar)
    g = principal_eigenvector(lbar)
    if sign is SignChoice.POS:
        return align_orders(f, g)
    if sign is SignChoice.NEG:
        return align_orders(f, -g)
    pos, neg = align_orders(f, g), align_orders(f, -g)
    return neg if hsic(kbar, lbar, neg) > hsic(kbar, lbar, pos) else pos


# ---------------------------------------------------------------------------
# objectives


def _dense(p: Permutation) -> np.ndarray:
    """Indicator matrix with ``D[p[i], i] = 1``."""
    d = np.zeros((p.n, p.n))
    d[p.map, np.arange(p.n)] = 1.0
    return d


def _gather_rows(lin, m: np.ndarray) -> np.ndarray:
    """``D^T M`` where ``D`` is a permutation (row gather) or a dense matrix."""
    if isinstance(lin, Permutation):
        return m[lin.map]
    return lin.T @ m


@dataclass
class Evaluation:
    score: float
    model: DependenceModel
    alpha: Optional[np.ndarray] = None


class _QuadraticObjective:
    """``tr(A P^T B P)`` with fixed symmetric PSD ``A`` (x side) and ``B`` (y side)."""

    monotone = True

    def __init__(self, a: np.ndarray, b: np.ndarray, model: DependenceModel):
        self.a = 0.5 * (a + a.T)
        self.b = 0.5 * (b + b.T)
        self.model = model

    def evaluate(self, p: Permutation) -> Evaluation:
        return Evaluation(hsic(self.a, self.b, p), self.model)

    def profit(self, lin, ev: Evaluation) -> np.ndarray:
        # profit[i, j] = d/dP[j, i] tr(A P^T B P_lin) / 2
        return self.a @ _gather_rows(lin, self.b)


class _LsmiObjective:
    """LSMI with fixed hyperparameters; alpha is refitted at every pairing."""

    monotone = False

    def __init__(self, x_cache: GramCache, y_cache: GramCache, model: DependenceModel):
        self.x_cache, self.y_cache = x_cache, y_cache
        self.model = model

    def _fit(self, p: Permutation, model: DependenceModel) -> Evaluation:
        sx, sy = model.sigma_x, model.sigma_y
        fit = lsmi_fit(
            self.x_cache.gram(sx),
            self.y_cache.gram(sy),
            p,
            model.lam,
            model.lambda_placement,
            kk=self.x_cache.square(sx),
            ll=self.y_cache.square(sy),
        )
        return Evaluation(fit.score, model, fit.alpha)

    def evaluate(self, p: Permutation) -> Evaluation:
        return self._fit(p, self.model)

    def profit(self, lin, ev: Evaluation) -> np.ndarray:
        k = self.x_cache.gram(ev.model.sigma_x)
        l = self.y_cache.gram(ev.model.sigma_y)
        return (k * ev.alpha[None, :]) @ _gather_rows(lin, l)


class _LsomCVObjective(_LsmiObjective):
    def __init__(self, x_cache, y_cache, search: LsomCV, widths: tuple, seed: int):
        super().__init__(x_cache, y_cache, None)
        self.search = search
        self.grid = [(c * widths[0], c * widths[1]) for c in search.width_multipliers]
        self.seed = seed

    def evaluate(self, p: Permutation) -> Evaluation:
        model = lsmi_cv_select(
            self.x_cache.x,
            self.y_cache.x,
            p,
            self.grid,
            self.search.lambdas,
            folds=self.search.folds,
            seed=self.seed,
            lambda_placement=self.search.lambda_placement,
            x_cache=self.x_cache,
            y_cache=self.y_cache,
        )
        return self._fit(p, model)


def build_objective(x, y, model, widths: tuple, seed: int = 0):
    """Objective for a fixed :class:`DependenceModel` or an :class:`LsomCV` search."""
    x, y = as_array(x), as_array(y)
    if isinstance(model, LsomCV):
        return _LsomCVObjective(GramCache(x), GramCache(y), model, widths, seed)
    if model.measure is Measure.HSIC:
        kbar = center(gaussian_gram(x, model.sigma_x)).gram
        lbar = center(gaussian_gram(y, model.sigma_y)).gram
        return _QuadraticObjective(kbar, lbar, model)
    if model.measure is Measure.NOCCO:
        ktil = nocco_normalize(center(gaussian_gram(x, model.sigma_x)), model.epsilon).gram
        ltil = nocco_normalize(center(gaussian_gram(y, model.sigma_y)), model.epsilon).gram
        return _QuadraticObjective(ktil, ltil, model)
    if model.measure is Measure.LSMI:
        return _LsmiObjective(GramCache(x), GramCache(y), model)
    raise ValueError(f"measure {model.measure.value!r} cannot be optimized")


def lap_step(objective, p_old, ev: Optional[Evaluation] = None) -> Permutation:
    """One linearize-and-assign step from ``p_old`` (a permutation or a dense
    doubly-stochastic linearization point). Returns the LAP maximizer."""
    if ev is None:
        if not isinstance(p_old, Permutation):
            raise ValueError("an evaluation is required for a dense linearization point")
        ev = objective.evaluate(p_old)
    q, _ = solve_lap(objective.profit(p_old, ev))
    return q


# ---------------------------------------------------------------------------
# outer loop


def _improves(objective, profit: np.ndarray, q_val: float, p: Permutation) -> bool:
    if not objective.monotone:
        return True
    old = assignment_value(profit, p)
    return q_val > old + 1e-12 * max(1.0, abs(old))


def _run_restart(objective, p0: Permutation, cfg: MatchConfig, restart: int, c: float):
    ev = objective.evaluate(p0)
    init_score = ev.score
    best = (ev.score, p0, ev)
    p = p0
    dense = None if cfg.eta == 1 else _dense(p0)
    last_q = None
    trace = []
    converged = False
    for t in range(1, cfg.max_iterations + 1):
        if dense is None:
            prof = objective.profit(p, ev)
            q, q_val = solve_lap(prof)
            if q == p or not _improves(objective, prof, q_val, p):
                trace.append((t, ev.score))
                converged = True
                break
            p_next = q
        else:
            prof = objective.profit(dense, ev)
            q, _ = solve_lap(prof)
            dense = (1.0 - cfg.eta) * dense
            dense[q.map, np.arange(q.n)] += cfg.eta
            p_next, _ = solve_lap(dense.T)
            if q == last_q and p_next == p:
                trace.append((t, ev.score))
                converged = True
                break
            last_q = q
        p = p_next
        ev = objective.evaluate(p)
        trace.append((t, ev.score))
        if ev.score > best[0]:
            best = (ev.score, p, ev)
    if objective.monotone:
        final = (ev.score, p, ev)
    else:
        final = best
    rt = RestartTrace(
        restart=restart,
        width_multiplier=c,
        init_score=init_score,
        trace=trace,
        converged=converged,
        final_permutation=final[1],
        final_score=final[0],
    )
    return rt, final[2]


def initial_permutations(x, y, cfg: MatchConfig, widths: tuple) -> list:
    n = as_array(x).shape[0]
    out = []
    for r in range(cfg.n_restarts):
        c = cfg.width_multipliers[r % len(cfg.width_multipliers)]
        if cfg.init is InitKind.EIGEN:
            p = eigen_init(x, y, c, cfg.sign_choice, widths=widths)
        elif cfg.init is InitKind.RANDOM:
            p = Permutation.random(n, np.random.default_rng([cfg.rng_seed, r]))
        else:
            p = Permutation.identity(n)
        out.append((c, p))
    return out


def run_match(x, y, model: Union[DependenceModel, LsomCV], cfg: MatchConfig = MatchConfig()) -> MatchResult:
    """Maximize the dependence of the pairing ``{(x_i, y_p[i])}`` over ``p``.

    Runs ``cfg.n_restarts`` restarts; restart ``r`` starts from the
    initialization at width multiplier ``cfg.width_multipliers[r % len]`` and
    iterates LAP steps until the pairing stops changing (or no longer
    improves the linearized objective) or ``cfg.max_iterations`` is reached.
    """
    x, y = as_array(x), as_array(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"sample counts differ: {x.shape[0]} vs {y.shape[0]}")
    widths = (
        median_width(x, cfg.exclude_self_distances),
        median_width(y, cfg.exclude_self_distances),
    )
    objective = build_objective(x, y, model, widths, seed=cfg.rng_seed)
    starts = initial_permutations(x, y, cfg, widths)

    def job(r):
        c, p0 = starts[r]
        return _run_restart(objective, p0, cfg, r, c)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            outcomes = list(pool.map(job, range(cfg.n_restarts)))
    else:
        outcomes = [job(r) for r in range(cfg.n_restarts)]

    best_r = 0
    for r, (rt, _) in enumerate(outcomes):
        if rt.final_score > outcomes[best_r][0].final_score:
            best_r = r
    rt, ev = outcomes[best_r]
    return MatchResult(
        permutation=rt.final_permutation,
        score=rt.final_score,
        best_restart=best_r,
        selected_model=ev.model,
        converged=rt.converged,
        restarts=[o[0] for o in outcomes],
        config=cfg,
    )


def run_match_arms(x, y, models: Sequence, cfg: MatchConfig = MatchConfig()) -> tuple:
    """Run several fixed-model arms; return ``(index, result)`` of the highest score.

    Ties go to the earliest arm.
    """
    if not models:
        raise ValueError("no arms given")
    results = [run_match(x, y, m, cfg) for m in models]
    best = max(range(len(results)), key=lambda i: (results[i].score, -i))
    return best, results[best], results


def median_model(x, y, measure, c: float = 1.0, exclude_self: bool = False, **params) -> DependenceModel:
    """Model with widths ``c * (m_x, m_y)`` from the median heuristic."""
    return DependenceModel(
        measure,
        c * median_width(x, exclude_self),
        c * median_width(y, exclude_self),
        **params,
    )
