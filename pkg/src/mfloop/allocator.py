"""Per-iteration task selection and budget bookkeeping.

Selection is a two-constraint 0/1 knapsack: total resource cost must fit
the iteration's resource allowance, and the selected tasks, packed
longest-first onto the workers of their queues, must finish within the
iteration's wall-clock allowance.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .errors import InvalidArgument

EXACT_LIMIT = 24
HEURISTICS = ("longest_sim", "proportional_steps")


def lpt_makespan(walltimes: Sequence[float], workers: int) -> float:
    """Makespan of longest-processing-time-first packing onto identical workers."""
    if not walltimes:
        return 0.0
    if workers < 1:
        return math.inf
    loads = [0.0] * min(workers, len(walltimes))
    heapq.heapify(loads)
    for w in sorted(walltimes, reverse=True):
        heapq.heappush(loads, heapq.heappop(loads) + w)
    return max(loads)


def queue_makespan(tasks, worker_counts: Mapping[str, int], queue_of) -> float:
    """Largest per-queue LPT makespan; ``tasks`` are candidates, ``queue_of`` maps level -> queue."""
    by_queue: dict = {}
    for c in tasks:
        by_queue.setdefault(queue_of(c.level), []).append(c.walltime)
    return max((lpt_makespan(w, worker_counts.get(q, 0)) for q, w in by_queue.items()), default=0.0)


@dataclass(frozen=True)
class SelectionDecision:
    decisions: dict
    total_benefit: float
    total_cost: float
    total_walltime: float
    optimal: bool

    @property
    def selected(self) -> list:
        return [key for key, y in self.decisions.items() if y]

    def to_dict(self) -> dict:
        return {
            "selected": [list(k) for k in self.selected],
            "total_benefit": self.total_benefit,
            "total_cost": self.total_cost,
            "total_walltime": self.total_walltime,
            "optimal": self.optimal,
        }


def _tie_order(candidates):
    # higher benefit first, then lower level, then lower index
    return sorted(range(len(candidates)), key=lambda k: (-candidates[k].benefit, candidates[k].level, candidates[k].m))


def _decision(candidates, chosen, worker_counts, queue_of, optimal):
    picked = [candidates[k] for k in sorted(chosen)]
    return SelectionDecision(
        decisions={(c.m, c.level): (k in chosen) for k, c in enumerate(candidates)},
        total_benefit=math.fsum(c.benefit for c in picked),
        total_cost=math.fsum(c.cost for c in picked),
        total_walltime=queue_makespan(picked, worker_counts, queue_of),
        optimal=optimal,
    )


def _feasible(cands, B, T, worker_counts, queue_of) -> bool:
    return math.fsum(c.cost for c in cands) <= B and queue_makespan(cands, worker_counts, queue_of) <= T


def _branch_and_bound(candidates, B, T, worker_counts, queue_of):
    items = [k for k in _tie_order(candidates) if candidates[k].benefit > 0]
    n = len(items)
    cost = [candidates[k].cost for k in items]
    wall = [candidates[k].walltime for k in items]
    ben = [candidates[k].benefit for k in items]
    queues = [queue_of(candidates[k].level) for k in items]
    capacity = {q: worker_counts.get(q, 0) for q in set(queues)}
    work_cap = sum(capacity[q] * T for q in capacity)
    # suffix order for the fractional bounds: by benefit per unit cost / per unit work
    by_cost = sorted(range(n), key=lambda i: -ben[i] / cost[i])
    by_work = sorted(range(n), key=lambda i: -ben[i] / wall[i])

    def frac_bound(order, weight, cap, depth):
        total = 0.0
        for i in order:
            if i < depth:
                continue
            if weight[i] <= cap:
                cap -= weight[i]
                total += ben[i]
            else:
                return total + ben[i] * cap / weight[i]
        return total

    best = [0.0, ()]
    chosen: list = []
    # per-queue running work and largest task, for a makespan lower bound
    work = {q: 0.0 for q in capacity}
    longest = {q: 0.0 for q in capacity}

    def lower_bound_ok(q):
        c = capacity[q]
        if c == 0:
            return work[q] == 0
        return max(work[q] / c, longest[q]) <= T

    def visit(depth, used_cost, used_work, value):
        if depth == n:
            sel = [candidates[items[i]] for i in chosen]
            total = math.fsum(c.benefit for c in sel)
            if total > best[0] and _feasible(sel, B, T, worker_counts, queue_of):
                best[0] = total
                best[1] = tuple(chosen)
            return
        bound = value + min(frac_bound(by_cost, cost, B - used_cost, depth),
                            frac_bound(by_work, wall, work_cap - used_work, depth))
        if bound + 1e-12 * max(1.0, abs(bound)) <= best[0]:
            return
        i = depth
        q = queues[i]
        if used_cost + cost[i] <= B:
            work[q] += wall[i]
            prev = longest[q]
            longest[q] = max(prev, wall[i])
            if lower_bound_ok(q):
                chosen.append(i)
                visit(depth + 1, used_cost + cost[i], used_work + wall[i], value + ben[i])
                chosen.pop()
            work[q] -= wall[i]
            longest[q] = prev
        visit(depth + 1, used_cost, used_work, value)

    visit(0, 0.0, 0.0, 0.0)
    return {items[i] for i in best[1]}


def _density_fill(candidates, B, T, worker_counts, queue_of) -> list:
    total_workers = max(1, sum(worker_counts.values()))
    B_scale = B if B > 0 else 1.0
    T_scale = T * total_workers if T > 0 else 1.0
    order = sorted(
        (k for k in _tie_order(candidates) if candidates[k].benefit > 0),
        key=lambda k: -candidates[k].benefit / (candidates[k].cost / B_scale + candidates[k].walltime / T_scale),
    )
    chosen: list = []
    for k in order:
        if _feasible([candidates[j] for j in chosen + [k]], B, T, worker_counts, queue_of):
            chosen.append(k)
    return chosen


def _greedy(candidates, B, T, worker_counts, queue_of):
    """Density-ordered greedy fill, then first-improvement 1-swaps until none helps."""
    chosen = _density_fill(candidates, B, T, worker_counts, queue_of)

    def value(sel):
        return math.fsum(candidates[j].benefit for j in sel)

    improved = True
    while improved:
        improved = False
        current = value(chosen)
        outside = [k for k in _tie_order(candidates) if k not in chosen and candidates[k].benefit > 0]
        for add in outside:
            # drop one selected task (or none) to make room for ``add``
            for pos in range(len(chosen) + 1):
                trial = chosen[:pos] + chosen[pos + 1:] + [add]
                if value(trial) > current and _feasible([candidates[j] for j in trial], B, T, worker_counts, queue_of):
                    chosen = trial
                    improved = True
                    break
            if improved:
                break
    return set(chosen)


def greedy_density(candidates, T_i, B_i, worker_counts, queue_of=None) -> SelectionDecision:
    """Pure greedy-by-density selection without the swap step (a baseline)."""
    queue_of = queue_of or (lambda level: "default")
    chosen = _density_fill(list(candidates), B_i, T_i, worker_counts, queue_of)
    return _decision(list(candidates), set(chosen), worker_counts, queue_of, False)


def select_tasks(candidates: Sequence, T_i: float, B_i: float, worker_counts: Mapping[str, int],
                 queue_of=None, *, exact_limit: int = EXACT_LIMIT) -> SelectionDecision:
    """Choose candidates maximizing total benefit within both allowances.

    ``queue_of`` maps a level index to its queue name (default: a single
    queue named ``"default"``). Candidates with zero benefit are never
    selected. Exact branch-and-bound up to ``exact_limit`` candidates,
    greedy plus 1-swap local search beyond.
    """
    if T_i < 0 or B_i < 0:
        raise InvalidArgument("iteration allowances must be non-negative")
    for c in candidates:
        if not (c.cost > 0 and c.walltime > 0):
            raise InvalidArgument("candidate cost and walltime must be positive")
    queue_of = queue_of or (lambda level: "default")
    candidates = list(candidates)
    if len(candidates) <= exact_limit:
        chosen = _branch_and_bound(candidates, B_i, T_i, worker_counts, queue_of)
        return _decision(candidates, chosen, worker_counts, queue_of, True)
    chosen = _greedy(candidates, B_i, T_i, worker_counts, queue_of)
    return _decision(candidates, chosen, worker_counts, queue_of, False)


@dataclass(frozen=True)
class BudgetState:
    T_remaining: float
    B_remaining: float
    I: int
    i: int = 1
    T_i: float = 0.0
    B_i: float = 0.0
    terminated: bool = False

    def __post_init__(self):
        if self.I < 1:
            raise InvalidArgument("iteration count I must be at least 1")

    def to_dict(self) -> dict:
        return {
            "T_remaining": self.T_remaining,
            "B_remaining": self.B_remaining,
            "I": self.I,
            "i": self.i,
            "T_i": self.T_i,
            "B_i": self.B_i,
            "terminated": self.terminated,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BudgetState":
        return cls(**d)


@dataclass(frozen=True)
class IterationPlan:
    T_i: float
    B_i: float
    counts: tuple
    terminated: bool = False
    batches_left: Optional[int] = None


def plan_iteration(state: BudgetState, base_costs: Sequence[float], max_walltime: float, heuristic: str,
                   max_counts: Optional[Sequence[int]] = None) -> IterationPlan:
    """Allowances ``(T_i, B_i)`` and candidate counts for the next iteration.

    ``longest_sim`` sets the wall-clock allowance to the longest simulation
    and spreads the resource budget evenly over the ``T_r // T_i`` batches
    that fit. ``proportional_steps`` gives each remaining iteration an equal
    share of both budgets. An iteration that cannot be afforded returns a
    terminated plan.
    """
    if heuristic not in HEURISTICS:
        raise InvalidArgument(f"unknown heuristic {heuristic!r}; expected one of {HEURISTICS}")
    L = len(base_costs)
    stop = IterationPlan(0.0, 0.0, (0,) * L, True)
    if state.terminated or state.i > state.I or state.T_remaining <= 0 or state.B_remaining <= 0:
        return stop
    if heuristic == "longest_sim":
        T_i = float(max_walltime)
        if T_i > state.T_remaining:
            return stop
        n_hat = max(1, math.floor(state.T_remaining / T_i))
        B_i = state.B_remaining / n_hat
    else:
        n_hat = state.I - state.i + 1
        T_i = state.T_remaining / n_hat
        B_i = state.B_remaining / n_hat
    counts = [math.ceil(B_i / c) for c in base_costs]
    if max_counts is not None:
        counts = [min(c, int(m)) for c, m in zip(counts, max_counts)]
    return IterationPlan(T_i, B_i, tuple(counts), False, n_hat)


def update_budgets(state: BudgetState, spent_T: float, spent_B: float) -> BudgetState:
    """Subtract the iteration's spend and advance the counter; negative remainder terminates."""
    if spent_T < 0 or spent_B < 0:
        raise InvalidArgument("spend must be non-negative")
    T_r = state.T_remaining - spent_T
    B_r = state.B_remaining - spent_B
    return replace(state, T_remaining=T_r, B_remaining=B_r, i=state.i + 1,
                   terminated=state.terminated or T_r < 0 or B_r < 0)


__all__ = [
    "BudgetState",
    "IterationPlan",
    "SelectionDecision",
    "greedy_density",
    "lpt_makespan",
    "plan_iteration",
    "queue_makespan",
    "select_tasks",
    "update_budgets",
]
