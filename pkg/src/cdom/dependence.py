"""Dependence scores for permuted pairings and LSMI model selection.

All functions take the pairing as a :class:`Permutation` ``p`` and evaluate
the measure on ``{(x_i, y_p[i])}`` through index gathers, e.g. the permuted
y-Gram is ``L[p][:, p]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .core import DependenceModel, Measure, Permutation, as_array
from .kernels import (
    NormalizedKernelMatrix,
    center,
    gaussian_gram,
    gram_of,
    median_width,
    nocco_normalize,
)


def permuted(g: np.ndarray, p: Permutation) -> np.ndarray:
    """``P^T G P`` for the pairing ``p``: entry ``(i, j)`` is ``G[p[i], p[j]]``."""
    idx = p.map
    return g[np.ix_(idx, idx)]


def _check_sizes(a: np.ndarray, b: np.ndarray, p: Permutation):
    if a.shape != b.shape or p.n != a.shape[0]:
        raise ValueError(f"size mismatch: {a.shape}, {b.shape}, permutation of {p.n}")


def trace_product(a: np.ndarray, b: np.ndarray) -> float:
    """``tr(A B)`` for symmetric ``B``, without forming the product."""
    return float(np.sum(a * b))


def hsic(kbar, lbar, p: Permutation) -> float:
    """``tr(Kbar P^T Lbar P)`` on centered Gram matrices."""
    k, l = gram_of(kbar), gram_of(lbar)
    _check_sizes(k, l, p)
    return trace_product(k, permuted(l, p))


def nocco_score(ktil, ltil, p: Permutation) -> float:
    """``tr(Ktil P^T Ltil P)`` on NOCCO-normalized matrices."""
    if isinstance(ktil, NormalizedKernelMatrix) and isinstance(ltil, NormalizedKernelMatrix):
        if ktil.epsilon != ltil.epsilon:
            raise ValueError(f"epsilon mismatch: {ktil.epsilon} vs {ltil.epsilon}")
    k, l = gram_of(ktil), gram_of(ltil)
    _check_sizes(k, l, p)
    # Ltil is not exactly symmetric in floating point; use the full trace.
    return float(np.einsum("ij,ji->", k, permuted(l, p)))


@dataclass
class LsmiFit:
    alpha: np.ndarray
    h: np.ndarray
    lam: float
    score: float


def _scaled_ridge(lam: float, n: int, placement: str) -> float:
    return lam / (n * n) if placement == "inside" else lam


def _solve_sym(h_mat: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    try:
        factor = linalg.cho_factor(h_mat, lower=True)
        return linalg.cho_solve(factor, rhs)
    except linalg.LinAlgError:
        pass
    try:
        return linalg.solve(h_mat, rhs, assume_a="sym")
    except (linalg.LinAlgError, ValueError) as exc:
        hint = " (use lambda > 0)" if lam == 0 else ""
        raise ValueError(f"LSMI system is singular{hint}") from exc


def lsmi_fit(
    k,
    l,
    p: Permutation,
    lam: float,
    lambda_placement: str = "outside",
    kk: Optional[np.ndarray] = None,
    ll: Optional[np.ndarray] = None,
) -> LsmiFit:
    """Least-squares mutual information on the pairing ``p``.

    ``k`` and ``l`` are uncentered Gram matrices. The basis functions are
    centered on the paired samples, giving

        H = (K K^T) o (P^T L L^T P) / n^2 + lam I
        h = (K o P^T L P) 1 / n
        alpha = H^-1 h,   score = alpha^T h / 2 - 1/2

    With ``lambda_placement="inside"`` the ridge is ``lam I / n^2`` instead.
    ``kk``/``ll`` may pass precomputed ``K K^T`` / ``L L^T``.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    kg, lg = gram_of(k), gram_of(l)
    _check_sizes(kg, lg, p)
    n = kg.shape[0]
    kk = kg @ kg.T if kk is None else kk
    ll = lg @ lg.T if ll is None else ll
    h_mat = kk * permuted(ll, p) / (n * n)
    h_mat[np.diag_indices(n)] += _scaled_ridge(lam, n, lambda_placement)
    h = np.sum(kg * permuted(lg, p), axis=1) / n
    alpha = _solve_sym(h_mat, h, lam)
    score = 0.5 * float(alpha @ h) - 0.5
    return LsmiFit(alpha=alpha, h=h, lam=float(lam), score=score)


def lsmi_trace_score(k, l, p: Permutation, alpha: np.ndarray) -> float:
    """``tr(P^T L P A K) / (2n) - 1/2`` with ``A = diag(alpha)``."""
    kg, lg = gram_of(k), gram_of(l)
    n = kg.shape[0]
    # tr(M diag(a) K) = sum_ij M_ij a_j K_ji
    return float(np.einsum("ij,j,ji->", permuted(lg, p), alpha, kg)) / (2 * n) - 0.5


class GramCache:
    """Memoized Gaussian Gram matrices (and their squares) per width."""

    def __init__(self, samples):
        self.x = as_array(samples)
        self._gram = {}
        self._square = {}
        self._blocks = {}

    def gram(self, sigma: float) -> np.ndarray:
        g = self._gram.get(sigma)
        if g is None:
            g = self._gram[sigma] = gaussian_gram(self.x, sigma).gram
        return g

    def square(self, sigma: float) -> np.ndarray:
        s = self._square.get(sigma)
        if s is None:
            g = self.gram(sigma)
            s = self._square[sigma] = g @ g.T
        return s

    def fold_products(self, sigma: float, tr: np.ndarray, te: np.ndarray) -> tuple:
        """``(K_tr K_tr^T, K_c K_c^T)`` for a train/test split (memoized).

        ``K_tr`` is the train-train block and ``K_c`` the train-test block.
        """
        key = (sigma, tr.tobytes(), te.tobytes())
        out = self._blocks.get(key)
        if out is None:
            g = self.gram(sigma)
            k_tr, k_c = g[np.ix_(tr, tr)], g[np.ix_(tr, te)]
            out = self._blocks[key] = (k_tr @ k_tr.T, k_c @ k_c.T)
        return out


def width_grid(x, y, multipliers: Sequence[float], exclude_self: bool = False) -> list:
    """Pairs ``(c * m_x, c * m_y)`` for each multiplier ``c``."""
    mx = median_width(x, exclude_self)
    my = median_width(y, exclude_self)
    return [(c * mx, c * my) for c in multipliers]


def fold_indices(n: int, folds: int, seed: int) -> list:
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(order, folds)]


def lsmi_cv_scores(
    x,
    y,
    p: Permutation,
    widths: Sequence[tuple],
    lambdas: Sequence[float],
    folds: int = 2,
    seed: int = 0,
    lambda_placement: str = "outside",
    x_cache: Optional[GramCache] = None,
    y_cache: Optional[GramCache] = None,
) -> list:
    """Mean held-out criterion for every ``(sigma_x, sigma_y, lam)`` candidate.

    On each fold, alpha is fitted on the training pairs with basis centers at
    those pairs; the held-out criterion is
    ``J = alpha^T H_te alpha / 2 - alpha^T h_te`` with ``H_te``/``h_te`` built
    from the held-out pairs (no ridge). Lower is better. Returns
    ``[((sx, sy, lam), J), ...]`` in grid order.
    """
    if not widths or not lambdas:
        raise ValueError("empty hyperparameter grid")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    x_cache = x_cache or GramCache(x)
    y_cache = y_cache or GramCache(y)
    n = x_cache.x.shape[0]
    if p.n != n or y_cache.x.shape[0] != n:
        raise ValueError("size mismatch between samples and permutation")
    if n < 2 * folds:
        raise ValueError(f"need n >= 2*folds, got n={n}, folds={folds}")
    splits = fold_indices(n, folds, seed)
    out = []
    for sx, sy in widths:
        kx = x_cache.gram(sx)
        ly = permuted(y_cache.gram(sy), p)
        totals = np.zeros(len(lambdas))
        for te in splits:
            tr = np.setdiff1d(np.arange(n), te, assume_unique=True)
            ntr, nte = tr.size, te.size
            k_tr, l_tr = kx[np.ix_(tr, tr)], ly[np.ix_(tr, tr)]
            k_c, l_c = kx[np.ix_(tr, te)], ly[np.ix_(tr, te)]
            kk_tr, kk_te = x_cache.fold_products(sx, tr, te)
            h_base = kk_tr * (l_tr @ l_tr.T) / (ntr * ntr)
            h_tr = np.sum(k_tr * l_tr, axis=1) / ntr
            h_te_mat = kk_te * (l_c @ l_c.T) / (nte * nte)
            h_te = np.sum(k_c * l_c, axis=1) / nte
            for a, lam in enumerate(lambdas):
                hm = h_base.copy()
                hm[np.diag_indices(ntr)] += _scaled_ridge(lam, ntr, lambda_placement)
                alpha = _solve_sym(hm, h_tr, lam)
                totals[a] += 0.5 * alpha @ h_te_mat @ alpha - alpha @ h_te
        for a, lam in enumerate(lambdas):
            out.append(((sx, sy, float(lam)), float(totals[a] / folds)))
    return out


def lsmi_cv_select(
    x,
    y,
    p: Permutation,
    widths: Sequence[tuple],
    lambdas: Sequence[float],
    folds: int = 2,
    seed: int = 0,
    lambda_placement: str = "outside",
    x_cache: Optional[GramCache] = None,
    y_cache: Optional[GramCache] = None,
) -> DependenceModel:
    """Pick the LSMI model with the lowest cross-validated criterion.

    Ties go to the earliest candidate in grid order (widths outer, lambdas inner).
    """
    scores = lsmi_cv_scores(
        x, y, p, widths, lambdas, folds, seed, lambda_placement, x_cache, y_cache
    )
    best = min(range(len(scores)), key=lambda i: (scores[i][1], i))
    sx, sy, lam = scores[best][0]
    return DependenceModel(Measure.LSMI, sx, sy, lam=lam, lambda_placement=lambda_placement)


def ksmi_objective(k, l, p: Permutation) -> float:
    """Pseudo log-determinant of ``G (K o P^T L P) G``, ``G`` the centering matrix.

    The matrix always has the null vector ``1``; only eigenvalues above
    ``1e-10`` times the largest one enter the sum.
    """
    kg, lg = gram_of(k), gram_of(l)
    _check_sizes(kg, lg, p)
    m = center(kg * permuted(lg, p)).gram
    m = 0.5 * (m + m.T)
    eig = linalg.eigvalsh(m)
    top = eig[-1]
    if not top > 0:
        raise ValueError("objective undefined: matrix has no positive eigenvalue")
    if eig[0] < -1e-9 * top:
        raise ValueError("objective undefined: matrix has negative eigenvalues")
    keep = eig[eig > 1e-10 * top]
    return float(np.sum(np.log(keep)))


def score(model: DependenceModel, x, y, p: Permutation) -> float:
    """Evaluate ``model`` on the pairing ``p`` of raw samples."""
    k = gaussian_gram(x, model.sigma_x)
    l = gaussian_gram(y, model.sigma_y)
    if model.measure is Measure.HSIC:
        return hsic(center(k), center(l), p)
    if model.measure is Measure.NOCCO:
        return nocco_score(
            nocco_normalize(center(k), model.epsilon),
            nocco_normalize(center(l), model.epsilon),
            p,
        )
    if model.measure is Measure.LSMI:
        return lsmi_fit(k, l, p, model.lam, model.lambda_placement).score
    return ksmi_objective(k, l, p)
