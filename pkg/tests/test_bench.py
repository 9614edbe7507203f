import math

import numpy as np
import pytest

from mfloop.bench import (
    BENCHMARKS,
    STOCHASTIC_NOISE_MIN,
    build_model,
    eh_analogue,
    forrester_pair,
    get_benchmark,
    grid_optimum,
    problem_from_dict,
    stochastic_micro,
)
from mfloop.domain import DesignPoint
from mfloop.errors import ConfigurationError, InvalidArgument


def forrester_high(x):
    return (6 * x - 2) ** 2 * np.sin(12 * x - 4)


def test_forrester_closed_forms():
    p = forrester_pair()
    x = np.linspace(0, 1, 201)[:, None]
    assert p.value([[0.0]], 1)[0] == pytest.approx(4 * math.sin(-4), abs=1e-12)
    assert p.value([[0.0]], 1)[0] == pytest.approx(3.0272, abs=1e-4)
    np.testing.assert_allclose(p.value(x, 1), forrester_high(x[:, 0]), atol=1e-12)
    np.testing.assert_allclose(p.value(x, 0) - (0.5 * p.value(x, 1) + 10 * (x[:, 0] - 0.5) - 5), 0, atol=1e-12)
    assert [lv.cost_model.base_cost for lv in p.levels] == [1.0, 10.0]
    assert p.direction == "minimize"


def test_forrester_optimum_certified():
    p = forrester_pair()
    grid = np.linspace(0, 1, 10_000)
    x_star = grid[np.argmin(forrester_high(grid))]
    point, value = p.true_optimum
    assert abs(point.coords[0] - x_star) < 1e-4
    assert abs(point.coords[0] - 0.7572) < 1e-4
    assert value <= forrester_high(grid).min() + 1e-12
    assert value == pytest.approx(forrester_high(point.coords[0]), abs=1e-12)


def test_eh_optimum_certified():
    p = eh_analogue()
    point, value = p.true_optimum
    g = np.linspace(0, 1, 100)
    X = np.stack([a.ravel() for a in np.meshgrid(g, g, indexing="ij")], axis=1)
    assert value >= p.value(X, 0).max()
    assert value == pytest.approx(p.value([point.coords], 0)[0], abs=1e-12)
    assert all(0.05 < c < 0.95 for c in point.coords)
    gp, gv = grid_optimum(p, 201)
    assert np.max(np.abs(np.subtract(gp.coords, point.coords))) <= 1 / 200


def test_eh_symmetry():
    p = eh_analogue()
    c1, c2 = np.array([0.62, 0.38]), np.array([0.40, 0.62])
    axis = (c2 - c1) / np.linalg.norm(c2 - c1)
    normal = np.array([-axis[1], axis[0]])
    rng = np.random.default_rng(0)
    for _ in range(50):
        base = c1 + rng.uniform(-0.3, 1.3) * (c2 - c1)
        d = rng.uniform(0, 0.3) * normal
        assert p.value([base + d], 0)[0] == pytest.approx(p.value([base - d], 0)[0], abs=1e-14)
    single = build_model({"kind": "gaussian_sum", "terms": [{"amplitude": 1.0, "center": [0.62, 0.38],
                                                             "width": [0.16, 0.16]}]})
    for d in rng.uniform(-0.3, 0.3, (20, 2)):
        assert single(np.array([c1 + d]))[0] == pytest.approx(single(np.array([c1 - d]))[0], abs=1e-15)


def test_eh_walltime_varies():
    lev = eh_analogue().levels[0]
    assert lev.cost_model.time([0.0, 0.0]) == 60.0
    assert lev.cost_model.max_walltime() == 105.0


def test_stochastic_noise_definition_and_draws():
    p = stochastic_micro()
    point, nv = STOCHASTIC_NOISE_MIN
    assert p.noise_var([point.coords], 1)[0] == nv
    x = np.linspace(0, 1, 101)[:, None]
    assert np.all(p.noise_var(x, 1) >= nv)
    assert np.all(p.noise_var(x, 0) == 0)
    xq = 0.6
    sigma2 = p.noise_var([[xq]], 1)[0]
    draws = np.array([p.evaluate(DesignPoint((xq,)), 1, seed=3, task_id=f"d{k}")[0] for k in range(100_000)])
    assert abs(draws.var(ddof=1) / sigma2 - 1) < 0.02
    assert abs(draws.mean() - p.value([[xq]], 1)[0]) < 5 * math.sqrt(sigma2 / len(draws))


def test_stochastic_levels_related():
    p = stochastic_micro()
    x = np.linspace(0, 1, 51)[:, None]
    np.testing.assert_allclose(p.value(x, 0), 0.8 * p.value(x, 1) + 0.1 - 0.2 * x[:, 0], atol=1e-12)
    assert [lv.queue_name for lv in p.levels] == ["cpu", "gpu"]


@pytest.mark.parametrize("name", sorted(BENCHMARKS))
def test_evaluators_pure(name):
    p = get_benchmark(name)
    rng = np.random.default_rng(1)
    for level in range(p.L):
        for u in rng.random((5, p.domain.dim)):
            pt = DesignPoint(tuple(p.domain.from_unit(u)))
            assert p.evaluate(pt, level, seed=7, task_id="abc") == p.evaluate(pt, level, seed=7, task_id="abc")


def test_noise_keyed_by_task():
    p = stochastic_micro()
    a = p.evaluate(DesignPoint((0.5,)), 1, seed=1, task_id="a")[0]
    b = p.evaluate(DesignPoint((0.5,)), 1, seed=1, task_id="b")[0]
    c = p.evaluate(DesignPoint((0.5,)), 1, seed=2, task_id="a")[0]
    assert len({a, b, c}) == 3


def test_hidden_constraint_infeasible():
    spec = {
        "name": "holed",
        "domain": {"lower": [0.0], "upper": [1.0]},
        "levels": [{"name": "only", "cost": {"base": 1.0, "walltime": 1.0},
                    "model": {"kind": "polynomial", "terms": [{"coef": 1.0, "powers": [1]}]},
                    "hidden": {"A": [[1.0]], "b": [0.5]}}],
    }
    p = problem_from_dict(spec)
    assert p.evaluate(DesignPoint((0.25,)), 0) == (0.25, 0.0, True)
    value, _, ok = p.evaluate(DesignPoint((0.75,)), 0)
    assert not ok and math.isnan(value)


def test_restrict_and_errors():
    p = forrester_pair()
    hf = p.restrict([1])
    assert hf.L == 1 and hf.true_optimum == p.true_optimum
    assert p.restrict([0]).true_optimum is None
    with pytest.raises(InvalidArgument):
        p.restrict([1, 0])
    with pytest.raises(ConfigurationError):
        get_benchmark("nope")
    with pytest.raises(ConfigurationError):
        problem_from_dict({"name": "x", "domain": {"lower": [0], "upper": [1]}, "levels": [{"name": "a"}]})
