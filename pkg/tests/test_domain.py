import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfloop.domain import (
    CostModel,
    DesignPoint,
    Domain,
    FidelityLevel,
    LinearConstraints,
    Observation,
    TrustPrior,
    check_hierarchy,
    denormalize,
    lhs_design,
    lhs_unit,
    normalize,
)
from mfloop.errors import DomainViolation, InvalidArgument


def boxes(max_dim=4):
    bound = st.floats(-1e3, 1e3, allow_nan=False)
    width = st.floats(1e-2, 1e3, allow_nan=False)
    return st.integers(1, max_dim).flatmap(
        lambda d: st.tuples(st.lists(bound, min_size=d, max_size=d), st.lists(width, min_size=d, max_size=d))
    ).map(lambda lw: Domain(tuple(lw[0]), tuple(a + w for a, w in zip(*lw))))


def test_normalize_corners_and_midpoint():
    box = Domain((0.0, 2.0), (4.0, 6.0))
    assert normalize(DesignPoint((0.0, 2.0)), box).coords == (0.0, 0.0)
    assert normalize(DesignPoint((4.0, 6.0)), box).coords == (1.0, 1.0)
    assert normalize(DesignPoint((2.0, 4.0)), box).coords == (0.5, 0.5)


def test_normalize_rejects_outside_and_wrong_dim():
    box = Domain((0.0,), (1.0,))
    with pytest.raises(DomainViolation):
        normalize(DesignPoint((1.5,)), box)
    with pytest.raises(DomainViolation):
        normalize(DesignPoint((0.5, 0.5)), box)
    with pytest.raises(DomainViolation):
        denormalize(DesignPoint((1.2,)), box)


@pytest.mark.parametrize("lo,hi", [((0.0,), (0.0,)), ((1.0,), (0.0,)), ((0.0,), (math.inf,)), ((), ())])
def test_domain_validation(lo, hi):
    with pytest.raises(InvalidArgument):
        Domain(lo, hi)


@given(boxes(), st.data())
def test_normalize_roundtrip(box, data):
    u = data.draw(st.lists(st.floats(0, 1), min_size=box.dim, max_size=box.dim))
    x = denormalize(DesignPoint(tuple(u)), box)
    assert box.contains(x)
    back = normalize(x, box)
    np.testing.assert_allclose(back.coords, u, rtol=1e-12, atol=1e-12)
    again = denormalize(back, box)
    np.testing.assert_allclose(again.coords, x.coords, rtol=1e-12, atol=1e-12 * np.max(box.width))


@given(st.integers(1, 64), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_lhs_stratified_every_axis(n, dim, seed):
    U = lhs_unit(n, dim, seed)
    assert U.shape == (n, dim)
    for j in range(dim):
        bins = np.floor(U[:, j] * n).astype(int)
        assert sorted(bins) == list(range(n))


def test_lhs_design_in_box_and_deterministic():
    box = Domain((-1.0, 10.0), (1.0, 20.0))
    a = lhs_design(7, box, seed=3)
    b = lhs_design(7, box, seed=3)
    assert a == b
    assert all(box.contains(p) for p in a)
    assert len(lhs_design(1, box, 0)) == 1
    with pytest.raises(InvalidArgument):
        lhs_design(0, box, 0)


def test_trust_prior_values():
    assert TrustPrior((0.1, 0.2, 0.3), "coord:0").variance([[2.0]])[0] == pytest.approx(1.7, abs=1e-15)
    assert TrustPrior((0.5, 1.0, 1.0), "coord:0").variance([[0.0]])[0] == 0.5
    assert TrustPrior().variance([[3.0, 4.0]])[0] == 0.0
    unit = TrustPrior((0.0, 1.0, 0.0), "unit:1")
    assert unit.variance([[0.0, 7.5]], Domain((0, 5), (1, 10)))[0] == pytest.approx(0.5)


@pytest.mark.parametrize("coeffs,feature", [((-1, 0, 0), "zero"), ((0, 0), "zero"), ((0, 0, 0), "bogus"),
                                            ((0, 0, 0), "coord:x")])
def test_trust_prior_rejects(coeffs, feature):
    with pytest.raises(InvalidArgument):
        TrustPrior(coeffs, feature)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 100), st.floats(0, 100))
def test_trust_monotone_in_feature(c1, c2, c3, k1, k2):
    p = TrustPrior((c1, c2, c3), "coord:0")
    lo, hi = sorted((k1, k2))
    assert p.variance([[lo]])[0] <= p.variance([[hi]])[0]


def test_cost_model_linear_multiplier():
    cm = CostModel(2.0, 60.0, (1.0, 0.5, -0.25))
    assert cm.cost([0.0, 0.0]) == 2.0
    assert cm.time([1.0, 1.0]) == pytest.approx(60.0 * 1.25)
    assert cm.max_factor() == 1.5
    assert cm.max_walltime() == 90.0
    with pytest.raises(InvalidArgument):
        CostModel(1.0, 1.0, (0.5, -0.5))
    with pytest.raises(InvalidArgument):
        CostModel(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        cm.check_dim(1)


def test_feasibility_and_hierarchy():
    lc = LinearConstraints(((1.0, 1.0),), (1.0,))
    lev = FidelityLevel(0, "a", CostModel(1, 1), feasibility=lc)
    assert list(lev.feasible([[0.2, 0.3], [0.9, 0.9]])) == [True, False]
    box = Domain.unit(2)
    check_hierarchy([lev], box)
    with pytest.raises(InvalidArgument):
        check_hierarchy([FidelityLevel(1, "a", CostModel(1, 1))], box)
    with pytest.raises(InvalidArgument):
        check_hierarchy([FidelityLevel(0, "a", CostModel(1, 1), TrustPrior((0, 0, 0), "coord:5"))], box)


def test_observation_roundtrip_and_validation():
    o = Observation(DesignPoint((0.1, 0.2)), 1, 3.5, 0.01, True, "t", 2.0)
    assert Observation.from_dict(o.to_dict()) == o
    bad = Observation((0.1,), 0, float("nan"), feasible=False)
    assert bad.to_dict()["value"] is None
    with pytest.raises(InvalidArgument):
        Observation((0.1,), 0, float("nan"))
    with pytest.raises(InvalidArgument):
        Observation((0.1,), 0, 1.0, noise_var=-1.0)
