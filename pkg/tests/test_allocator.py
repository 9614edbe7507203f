import heapq
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfloop.acquisition import make_candidate
from mfloop.allocator import (
    BudgetState,
    greedy_density,
    lpt_makespan,
    plan_iteration,
    select_tasks,
    update_budgets,
)
from mfloop.domain import DesignPoint
from mfloop.errors import InvalidArgument


def cand(m, level, acq, cost, wall):
    return make_candidate(m, level, DesignPoint((0.5,)), (0.5,), acq, cost, wall)


def oracle_makespan(walls, workers):
    if not walls:
        return 0.0
    loads = [0.0] * min(workers, len(walls))
    for w in sorted(walls, reverse=True):
        k = loads.index(min(loads))
        loads[k] += w
    return max(loads)


def enumerate_best(cands, T, B, counts, queue_of):
    best = 0.0
    for r in range(len(cands) + 1):
        for sub in itertools.combinations(cands, r):
            if math.fsum(c.cost for c in sub) > B:
                continue
            by_q = {}
            for c in sub:
                by_q.setdefault(queue_of(c.level), []).append(c.walltime)
            if any(oracle_makespan(w, counts.get(q, 0)) > T for q, w in by_q.items()):
                continue
            best = max(best, math.fsum(c.benefit for c in sub))
    return best


def random_instance(rng, n):
    cands = [cand(m, int(rng.integers(0, 2)), rng.uniform(0, 2), rng.uniform(0.5, 10), rng.uniform(0.5, 10))
             for m in range(n)]
    return cands, rng.uniform(1, 25), rng.uniform(1, 30), {"q0": int(rng.integers(1, 3)), "q1": int(rng.integers(1, 3))}


queue_of = lambda level: f"q{level}"


def test_single_candidate():
    c = cand(0, 0, 3.0, 1.0, 1.0)
    d = select_tasks([c], 5, 5, {"default": 1})
    assert d.selected == [(0, 0)] and d.total_benefit == c.benefit


def test_dominance():
    a, b = cand(0, 0, 3.0, 10.0, 1.0), cand(1, 0, 2.0, 10.0, 1.0)
    d = select_tasks([a, b], 100, 10, {"default": 1})
    assert d.selected == [(0, 0)]


def test_lpt_examples():
    assert lpt_makespan([3, 5], 1) == 8
    assert lpt_makespan([5, 3, 3], 2) == 6
    assert lpt_makespan([], 3) == 0
    assert lpt_makespan([1.0], 0) == math.inf


def test_six_candidates_one_worker_matches_enumeration():
    rng = np.random.default_rng(6)
    for _ in range(50):
        cands = [cand(m, 0, rng.uniform(0, 2), rng.uniform(0.5, 5), rng.uniform(0.5, 5)) for m in range(6)]
        T, B = rng.uniform(1, 15), rng.uniform(1, 15)
        d = select_tasks(cands, T, B, {"default": 1})
        assert d.total_benefit == enumerate_best(cands, T, B, {"default": 1}, lambda l: "default")


def test_exact_matches_enumeration_two_queues():
    rng = np.random.default_rng(11)
    for _ in range(100):
        cands, T, B, counts = random_instance(rng, int(rng.integers(0, 9)))
        d = select_tasks(cands, T, B, counts, queue_of)
        assert d.optimal
        assert d.total_benefit == enumerate_best(cands, T, B, counts, queue_of)
        assert d.total_cost <= B and d.total_walltime <= T


@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_heuristic_feasible_and_beats_greedy(seed, n):
    rng = np.random.default_rng(seed)
    cands, T, B, counts = random_instance(rng, n)
    h = select_tasks(cands, T, B, counts, queue_of, exact_limit=0)
    g = greedy_density(cands, T, B, counts, queue_of)
    assert not h.optimal
    assert h.total_cost <= B and h.total_walltime <= T
    assert h.total_benefit >= g.total_benefit - 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_benefit_scaling_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    cands, T, B, counts = random_instance(rng, 8)
    scaled = [cand(c.m, c.level, c.acq_value * scale, c.cost, c.walltime) for c in cands]
    a = select_tasks(cands, T, B, counts, queue_of)
    b = select_tasks(scaled, T, B, counts, queue_of)
    assert a.total_benefit * scale == pytest.approx(b.total_benefit, rel=1e-12, abs=1e-300)
    assert enumerate_best(scaled, T, B, counts, queue_of) == b.total_benefit


def test_zero_benefit_never_selected_and_errors():
    d = select_tasks([cand(0, 0, 0.0, 1, 1)], 10, 10, {"default": 1})
    assert d.selected == []
    with pytest.raises(InvalidArgument):
        select_tasks([], -1, 1, {})


def test_unserved_queue_never_selected():
    d = select_tasks([cand(0, 1, 1.0, 1, 1)], 10, 10, {"q0": 2}, queue_of)
    assert d.selected == []


def test_longest_sim_plan():
    p = plan_iteration(BudgetState(100.0, 40.0, I=10), [1.0], 25.0, "longest_sim")
    assert p.T_i == 25.0 and p.batches_left == 4 and p.B_i == 10.0


def test_last_proportional_step_takes_all():
    p = plan_iteration(BudgetState(37.0, 11.0, I=10, i=10), [1.0], 5.0, "proportional_steps")
    assert (p.T_i, p.B_i) == (37.0, 11.0)


def test_candidate_counts():
    p = plan_iteration(BudgetState(90.0, 12.0, I=3), [1.0, 4.0], 1.0, "proportional_steps")
    assert p.B_i == 4.0 and p.counts == (4, 1)
    capped = plan_iteration(BudgetState(90.0, 12.0, I=3), [1.0, 4.0], 1.0, "proportional_steps", (2, 1))
    assert capped.counts == (2, 1)


def test_plan_terminates():
    assert plan_iteration(BudgetState(0.0, 5.0, I=3), [1.0], 1.0, "proportional_steps").terminated
    assert plan_iteration(BudgetState(5.0, 5.0, I=3, i=4), [1.0], 1.0, "proportional_steps").terminated
    assert plan_iteration(BudgetState(5.0, 5.0, I=3), [1.0], 6.0, "longest_sim").terminated
    with pytest.raises(InvalidArgument):
        plan_iteration(BudgetState(5.0, 5.0, I=3), [1.0], 1.0, "greedy")


def test_update_budgets_examples():
    s = update_budgets(BudgetState(10.0, 10.0, I=5), 3.0, 4.0)
    assert (s.T_remaining, s.B_remaining, s.i, s.terminated) == (7.0, 6.0, 2, False)
    assert update_budgets(BudgetState(2.0, 10.0, I=5), 3.0, 0.0).terminated
    z = update_budgets(BudgetState(4.0, 6.0, I=5, i=2), 0.0, 0.0)
    assert (z.T_remaining, z.B_remaining, z.i, z.terminated) == (4.0, 6.0, 3, False)
    with pytest.raises(InvalidArgument):
        update_budgets(z, -1.0, 0.0)
    with pytest.raises(InvalidArgument):
        BudgetState(1.0, 1.0, I=0)


@given(st.floats(0, 1e3), st.floats(0, 1e3), st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50)), max_size=10))
def test_budget_bookkeeping_matches_running_sum(T, B, spends):
    s = BudgetState(T, B, I=max(1, len(spends)))
    t, b, stopped = T, B, False
    for dt, db in spends:
        s = update_budgets(s, dt, db)
        t, b = t - dt, b - db
        stopped = stopped or t < 0 or b < 0
        assert (s.T_remaining, s.B_remaining, s.terminated) == (t, b, stopped)
