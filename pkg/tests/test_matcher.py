import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdom.core import DependenceModel, InitKind, MatchConfig, Measure, Permutation, SignChoice, matched_accuracy
from cdom.dependence import hsic, score
from cdom.kernels import center, gaussian_gram, median_width
from cdom.matcher import (
    LsomCV,
    align_orders,
    build_objective,
    eigen_init,
    lap_step,
    median_model,
    principal_eigenvector,
    run_match,
    run_match_arms,
)


def toy(seed, n=30, noise=0.1):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    y = np.column_stack([np.sin(x[:, 0]), x[:, 1] ** 2]) + noise * rng.standard_normal((n, 2))
    order = rng.permutation(n)
    return x, y[order], Permutation(np.argsort(order))


class TestAlignOrders:
    def test_both_ascending(self):
        assert align_orders(np.arange(5.0), np.arange(5.0) * 3) == Permutation.identity(5)

    def test_opposite(self):
        assert align_orders(np.arange(5.0), -np.arange(5.0)).tolist() == [4, 3, 2, 1, 0]

    @settings(max_examples=40)
    @given(st.integers(0, 2**32 - 1))
    def test_rearrangement_optimum(self, seed):
        rng = np.random.default_rng(seed)
        f, g = rng.standard_normal(6), rng.standard_normal(6)
        p = align_orders(f, g)
        best = max(sum(f[i] * g[q[i]] for i in range(6)) for q in itertools.permutations(range(6)))
        assert sum(f[i] * g[p.map[i]] for i in range(6)) == pytest.approx(best)


def test_principal_eigenvector_sign():
    m = np.diag([1.0, 5.0, 2.0])
    v = principal_eigenvector(m)
    assert np.allclose(v, [0, 1, 0])
    v = principal_eigenvector(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert v[np.argmax(np.abs(v))] > 0


def _quad(x, y, c, p):
    kbar = center(gaussian_gram(x, c * median_width(x))).gram
    lbar = center(gaussian_gram(y, c * median_width(y))).gram
    f, g = principal_eigenvector(kbar), principal_eigenvector(lbar)
    return kbar, lbar, f, g


def test_eigen_init_maximizes_rank_one_hsic():
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal((6, 2)), rng.standard_normal((6, 1))
    kbar, lbar, f, g = _quad(x, y, 1.0, None)
    p = eigen_init(x, y, 1.0, SignChoice.POS)
    # |f^T P g|^2 with (P g)_i = g[p[i]]
    value = (f @ g[p.map]) ** 2
    best = max((f @ g[list(q)]) ** 2 for q in itertools.permutations(range(6)))
    assert value == pytest.approx(best)


def test_eigen_init_sign_choices():
    x, y, _ = toy(2)
    kbar, lbar, f, g = _quad(x, y, 1.0, None)
    pos = eigen_init(x, y, 1.0, "pos")
    neg = eigen_init(x, y, 1.0, "neg")
    both = eigen_init(x, y, 1.0, "both")
    assert pos == align_orders(f, g) and neg == align_orders(f, -g)
    assert both == max((pos, neg), key=lambda p: (hsic(kbar, lbar, p), p is pos))


def test_eigen_init_rejects_bad_c():
    x, y, _ = toy(3)
    with pytest.raises(ValueError):
        eigen_init(x, y, 0.0)


def test_lap_step_at_brute_force_optimum():
    rng = np.random.default_rng(5)
    x, y = rng.standard_normal((5, 1)), rng.standard_normal((5, 1))
    model = median_model(x, y, Measure.HSIC)
    obj = build_objective(x, y, model, (median_width(x), median_width(y)))
    perms = [Permutation(q) for q in itertools.permutations(range(5))]
    vals = [obj.evaluate(p).score for p in perms]
    best = perms[int(np.argmax(vals))]
    q = lap_step(obj, best)
    assert obj.evaluate(q).score == pytest.approx(max(vals), abs=1e-12)


def test_lap_step_zero_kernel_is_canonical():
    x = np.ones((4, 1)) + np.arange(4)[:, None]
    obj = build_objective(x, x, DependenceModel("hsic", 1e9, 1e9), (1, 1))
    a = lap_step(obj, Permutation([3, 2, 1, 0]))
    assert a == lap_step(obj, Permutation([1, 0, 3, 2]))


def test_lap_step_monotone_random_starts():
    x, y, _ = toy(6)
    model = median_model(x, y, Measure.HSIC)
    obj = build_objective(x, y, model, (1, 1))
    rng = np.random.default_rng(6)
    for _ in range(100):
        p = Permutation.random(30, rng)
        assert obj.evaluate(lap_step(obj, p)).score >= obj.evaluate(p).score - 1e-12


def test_self_matching_recovers_identity():
    x = np.random.default_rng(7).standard_normal((20, 2))
    r = run_match(x, x, median_model(x, x, Measure.HSIC))
    assert matched_accuracy(r.permutation, Permutation.identity(20)) == 1.0


def test_rejects_mismatched_and_tiny_inputs():
    x = np.random.default_rng(8).standard_normal((6, 1))
    with pytest.raises(ValueError):
        run_match(x, x[:5], median_model(x, x, Measure.HSIC))
    with pytest.raises(ValueError):
        run_match(x[:1], x[:1], DependenceModel("hsic", 1, 1))


def test_ksmi_not_optimizable():
    x, y, _ = toy(9)
    with pytest.raises(ValueError):
        run_match(x, y, DependenceModel("ksmi", 1, 1))


@pytest.mark.parametrize("measure", ["hsic", "nocco"])
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_trace_and_result_contract(measure, seed):
    x, y, _ = toy(seed % 1000, n=20)
    params = {"epsilon": 0.05} if measure == "nocco" else {}
    cfg = MatchConfig(max_iterations=10, n_restarts=4, rng_seed=seed % 7)
    r = run_match(x, y, median_model(x, y, measure, **params), cfg)
    for rt in r.restarts:
        s = [rt.init_score] + [v for _, v in rt.trace]
        assert all(b >= a - 1e-12 for a, b in zip(s, s[1:]))
        assert len(rt.trace) <= cfg.max_iterations
        assert [t for t, _ in rt.trace] == list(range(1, len(rt.trace) + 1))
        assert r.score >= rt.init_score
    finals = [rt.final_score for rt in r.restarts]
    assert r.score == max(finals)
    assert r.best_restart == finals.index(max(finals))
    assert r.score == pytest.approx(score(r.selected_model, x, y, r.permutation), abs=1e-9)


def test_lsmi_tracks_best_so_far():
    x, y, _ = toy(10, n=24)
    cfg = MatchConfig(n_restarts=3, max_iterations=6)
    r = run_match(x, y, median_model(x, y, Measure.LSMI, lam=0.01), cfg)
    observed = [rt.init_score for rt in r.restarts] + [v for rt in r.restarts for _, v in rt.trace]
    assert r.score == max(observed)
    assert r.score == pytest.approx(score(r.selected_model, x, y, r.permutation))


def test_lsom_cv_result():
    x, y, _ = toy(11, n=24)
    cfg = MatchConfig(n_restarts=2, max_iterations=4)
    r = run_match(x, y, LsomCV(), cfg)
    assert r.selected_model.measure is Measure.LSMI
    assert r.selected_model.lam in LsomCV().lambdas
    assert r.score == pytest.approx(score(r.selected_model, x, y, r.permutation))
    observed = [rt.init_score for rt in r.restarts] + [v for rt in r.restarts for _, v in rt.trace]
    assert r.score == max(observed)


def test_deterministic_and_worker_independent():
    x, y, _ = toy(12)
    model = median_model(x, y, Measure.NOCCO, epsilon=0.05)
    a = run_match(x, y, model, MatchConfig(rng_seed=3))
    b = run_match(x, y, model, MatchConfig(rng_seed=3, workers=4))
    assert a.permutation == b.permutation and a.score == b.score
    assert [rt.trace for rt in a.restarts] == [rt.trace for rt in b.restarts]


def test_restarts_cycle_multipliers():
    x, y, _ = toy(13)
    cfg = MatchConfig(n_restarts=5, width_multipliers=(1.0, 2.0), max_iterations=2)
    r = run_match(x, y, median_model(x, y, Measure.HSIC), cfg)
    assert [rt.width_multiplier for rt in r.restarts] == [1.0, 2.0, 1.0, 2.0, 1.0]


@pytest.mark.parametrize("init", list(InitKind))
def test_init_kinds(init):
    x, y, _ = toy(14)
    cfg = MatchConfig(n_restarts=3, init=init, max_iterations=3, rng_seed=2)
    r = run_match(x, y, median_model(x, y, Measure.HSIC), cfg)
    starts = {tuple(rt.final_permutation.tolist()) for rt in r.restarts}
    assert starts  # ran
    if init is InitKind.IDENTITY:
        assert len({rt.init_score for rt in r.restarts}) == 1


def test_fractional_step_size():
    x, y, truth = toy(15, noise=0.02)
    model = median_model(x, y, Measure.HSIC)
    r = run_match(x, y, model, MatchConfig(eta=0.5, n_restarts=3))
    assert isinstance(r.permutation, Permutation)
    assert all(len(rt.trace) <= 20 for rt in r.restarts)
    assert r.score == pytest.approx(score(model, x, y, r.permutation))


def test_arms_pick_highest_score():
    x, y, _ = toy(16)
    arms = [median_model(x, y, Measure.NOCCO, epsilon=e) for e in (0.01, 0.05)]
    idx, best, results = run_match_arms(x, y, arms, MatchConfig(n_restarts=3))
    assert best.score == max(r.score for r in results)
    assert best is results[idx]
    with pytest.raises(ValueError):
        run_match_arms(x, y, [], MatchConfig())
