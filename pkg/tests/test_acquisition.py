import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfloop.acquisition import (
    REPULSION_RADIUS,
    acquisition,
    ei,
    expected_improvement,
    log_ei,
    make_candidate,
    propose_batch,
    variance_gap,
    variance_reduction_benefit,
)
from mfloop.domain import CostModel, DesignPoint, FidelityLevel, LinearConstraints, TrustPrior
from mfloop.errors import InvalidArgument, NoCandidates
from mfloop.gp import KernelParams, condition_on, gp_predict
from mfloop.mf import Bridge, LevelData, MfSurrogate, fit_mf

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_deterministic_limits():
    assert expected_improvement(5.0, 0.0, 3.0) == 2.0
    assert expected_improvement(1.0, 0.0, 3.0) == 0.0
    assert expected_improvement(3.0, 1e-30, 3.0) == 0.0


def test_ei_at_incumbent_monte_carlo():
    z = np.random.default_rng(0).standard_normal(10**7)
    mc = np.maximum(z, 0).mean()
    assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(mc, abs=1e-3)
    assert expected_improvement(0.0, 1.0, 0.0) == pytest.approx(0.398942, abs=1e-4)


@given(finite, st.floats(0, 1e4), finite)
def test_ei_jensen_bound(mean, var, best):
    v = expected_improvement(mean, var, best)
    assert v >= max(mean - best, 0.0) - 1e-9 * max(1.0, abs(mean), abs(best))
    assert v >= 0


@given(st.floats(-50, -1e-3), st.lists(st.floats(1e-3, 1e2), min_size=2, max_size=10))
def test_ei_monotone_in_sigma_below_best(gap, sigmas):
    sig = np.sort(sigmas)
    vals = ei(np.full(len(sig), gap), sig**2, 0.0)
    assert np.all(np.diff(vals) >= -1e-15)


@given(finite, st.floats(1e-6, 1e4), finite)
def test_log_ei_consistent(mean, var, best):
    v = expected_improvement(mean, var, best)
    lv = float(log_ei(mean, var, best))
    if v > 1e-250:
        assert lv == pytest.approx(np.log(v), rel=1e-8, abs=1e-8)
    else:
        assert np.isfinite(lv) or lv == -np.inf


def test_log_ei_deep_tail_finite():
    assert np.isfinite(log_ei(-100.0, 1.0, 0.0))
    assert log_ei(-1.0, 0.0, 0.0) == -np.inf


@given(st.floats(1e-6, 10), st.floats(1e-3, 100), st.floats(1e-3, 100))
def test_benefit_decreases_with_cost(acq, c1, c2):
    lo, hi = sorted((c1, c2))
    if hi <= lo * (1 + 1e-9):
        return
    a = make_candidate(0, 0, DesignPoint((0.5,)), (0.5,), acq, lo, 1.0)
    b = make_candidate(0, 0, DesignPoint((0.5,)), (0.5,), acq, hi, 1.0)
    assert a.benefit == acq / lo
    assert b.benefit < a.benefit


def test_negative_acq_clamped():
    c = make_candidate(0, 1, DesignPoint((0.5,)), (0.5,), -0.2, 2.0, 1.0)
    assert c.acq_value == 0.0 and c.benefit == 0.0


def _fixture():
    """Base GP far from its data at u=1 (variance = prior 0.4) plus a bridge with residual variance 0.5."""
    base = condition_on(KernelParams(0.4, (0.01,), 0.0), [[0.0]], [1.0], y_mean=0.0, y_std=1.0)
    return MfSurrogate(base, (Bridge((1.0,), (0.0,), 0, residual_var=0.5),))


def test_variance_benefit_constructed_fixture():
    s = _fixture()
    x = DesignPoint((1.0,))
    _, v0 = gp_predict(s.base, [1.0])
    assert v0 == pytest.approx(0.4, abs=1e-12)
    assert variance_reduction_benefit(s, x, 1) == pytest.approx(0.5, abs=1e-12)
    assert variance_reduction_benefit(s, x, 0) == pytest.approx(v0, abs=0)
    same = MfSurrogate(s.base, (Bridge.identity(),))
    assert variance_reduction_benefit(same, x, 1) == 0.0
    with pytest.raises(InvalidArgument):
        variance_reduction_benefit(s, x, 2)


def _levels(L, feasibility=None):
    return [FidelityLevel(k, f"l{k}", CostModel(1.0 + 4 * k, 1.0), feasibility=feasibility) for k in range(L)]


def _surrogate_1d():
    U = np.array([[0.05], [0.4], [0.8]])
    return fit_mf([LevelData(U, np.sin(6 * U[:, 0]))])


def test_zero_counts_empty():
    assert propose_batch(_surrogate_1d(), [0], "optimize", 0, _levels(1), best=0.0) == []


def test_two_candidates_are_distinct():
    s = _surrogate_1d()
    for seed in range(5):
        a, b = propose_batch(s, [2], "optimize", seed, _levels(1), best=float(np.max(np.sin(6 * s.base.X))))
        assert abs(a.u[0] - b.u[0]) > 1e-3


def test_placeholder_loop_leaves_surrogate_alone():
    s = _surrogate_1d()
    Q = np.linspace(0, 1, 21)[:, None]
    before = s.predict(Q, 0)
    propose_batch(s, [3], "reduce_variance", 0, _levels(1))
    after = s.predict(Q, 0)
    np.testing.assert_array_equal(before[1], after[1])


def test_propose_deterministic():
    s = _surrogate_1d()
    a = propose_batch(s, [2], "optimize", 7, _levels(1), best=0.5)
    b = propose_batch(s, [2], "optimize", 7, _levels(1), best=0.5)
    assert a == b


def test_reduce_variance_finds_peak():
    Ulo = np.linspace(0, 1, 15)[:, None]
    Uhi = np.linspace(0, 1, 6)[:, None]
    f = lambda U: np.cos(3 * U[:, 0])
    bump = TrustPrior((0.0, 1.0, 0.0), lambda X: np.exp(-((X[:, 0] - 0.7) ** 2) / 0.005))
    s = fit_mf([LevelData(Ulo, f(Ulo)), LevelData(Uhi, 1.2 * f(Uhi))], trust=(TrustPrior(), bump), degrees=0)
    grid = np.linspace(0, 1, 2001)[:, None]
    oracle = grid[np.argmax(variance_gap(s, grid, 1)), 0]
    cands = propose_batch(s, [0, 1], "reduce_variance", 0, _levels(2))
    assert len(cands) == 1 and cands[0].level == 1
    assert abs(cands[0].u[0] - 0.7) < 0.05
    assert abs(cands[0].u[0] - oracle) < 0.01


def test_repulsion_and_feasibility_respected():
    s = _surrogate_1d()
    repel = [[0.5], [0.52]]
    feas = LinearConstraints(((1.0,),), (0.9,))
    for seed in range(3):
        for c in propose_batch(s, [3], "reduce_variance", seed, _levels(1, feas), repulsion=repel):
            assert c.u[0] <= 0.9 + 1e-12
            assert min(abs(c.u[0] - r[0]) for r in repel) > REPULSION_RADIUS


def test_no_feasible_region():
    feas = LinearConstraints(((1.0,),), (-1.0,))
    with pytest.raises(NoCandidates):
        propose_batch(_surrogate_1d(), [1], "reduce_variance", 0, _levels(1, feas))


def test_argument_checks():
    s = _surrogate_1d()
    with pytest.raises(InvalidArgument):
        propose_batch(s, [1], "explore", 0, _levels(1))
    with pytest.raises(InvalidArgument):
        propose_batch(s, [1], "optimize", 0, _levels(1))
    with pytest.raises(InvalidArgument):
        propose_batch(s, [-1], "reduce_variance", 0, _levels(1))
    with pytest.raises(InvalidArgument):
        acquisition(s, np.array([[0.5]]), 0, "optimize")


@settings(max_examples=40)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.05, 3))
def test_ei_matches_quadrature(mean, best, sigma):
    from scipy import integrate, stats

    quad = integrate.quad(lambda z: (mean + sigma * z - best) * stats.norm.pdf(z), max((best - mean) / sigma, -40.0),
                          40.0, points=[0.0], epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    assert expected_improvement(mean, sigma**2, best) == pytest.approx(quad, rel=1e-9, abs=1e-13)
