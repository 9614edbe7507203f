"""Derivative-free compass (pattern) search, run from many starts in lockstep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc


@dataclass
class SearchResult:
    x: np.ndarray  # (k, p) final point per start
    f: np.ndarray  # (k,) objective at x
    f0: np.ndarray  # (k,) objective at the start points
    n_evals: int

    @property
    def best(self) -> int:
        # first index among ties, so the result is order-deterministic
        return int(np.argmax(self.f))


def sobol_starts(k: int, lower, upper, seed: int) -> np.ndarray:
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    sampler = qmc.Sobol(d=len(lower), scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(k, 1))))
    U = sampler.random_base2(m)[:k]
    return lower + U * (upper - lower)


def pattern_search(fun, X0, lower, upper, *, step=0.25, min_step=1e-4, max_evals=200) -> SearchResult:
    """Maximize ``fun`` from every row of ``X0``.

    ``fun`` maps an ``(m, p)`` array to ``(m,)`` values; ``-inf`` marks
    infeasible points. Each round polls the 2p compass neighbours of every
    active start in one call, moves to the best strictly improving
    neighbour, otherwise halves that start's step. ``max_evals`` counts
    objective evaluations per start, the start point included.
    """
    X = np.array(X0, dtype=float, copy=True)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    k, p = X.shape
    f = np.asarray(fun(X), dtype=float)
    f0 = f.copy()
    steps = np.full(k, float(step))
    used = np.ones(k, dtype=int)
    total = k
    directions = np.vstack([np.eye(p), -np.eye(p)])
    while True:
        active = np.flatnonzero((steps >= min_step) & (used + 2 * p <= max_evals))
        if active.size == 0:
            break
        trial = X[active, None, :] + steps[active, None, None] * directions[None, :, :]
        trial = np.clip(trial, lower, upper)
        ft = np.asarray(fun(trial.reshape(-1, p)), dtype=float).reshape(active.size, 2 * p)
        used[active] += 2 * p
        total += active.size * 2 * p
        j = np.argmax(ft, axis=1)
        fbest = ft[np.arange(active.size), j]
        improved = fbest > f[active]
        moved = active[improved]
        X[moved] = trial[improved, j[improved]]
        f[moved] = fbest[improved]
        steps[active[~improved]] *= 0.5
    return SearchResult(X, f, f0, total)
