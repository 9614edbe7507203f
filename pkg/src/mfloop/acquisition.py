"""Candidate scoring and batch proposal.

Two campaign goals are supported. ``optimize`` scores candidates by
expected improvement of the top-level prediction over the best feasible
top-level observation; a lower-level candidate's EI is scaled by how much
an evaluation there would tell us about the top level (the correlation of
the two predictions under the bridge chain). ``reduce_variance`` scores a
level by how much its predictive variance exceeds the level below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import erfcx, ndtr

from .domain import DesignPoint, FidelityLevel
from .errors import InvalidArgument, NoCandidates
from .mf import MfSurrogate
from .search import pattern_search, sobol_starts

SIGMA_EPS = 1e-12
N_STARTS = 32
EVALS_PER_START = 200
REPULSION_RADIUS = 0.02
MODES = ("optimize", "reduce_variance")

_SQRT_HALF_PI = math.sqrt(math.pi / 2)
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class CandidateTask:
    m: int
    level: int
    point: DesignPoint
    u: tuple
    acq_value: float
    cost: float
    walltime: float
    benefit: float

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "level": self.level,
            "point": list(self.point.coords),
            "acq_value": self.acq_value,
            "cost": self.cost,
            "walltime": self.walltime,
            "benefit": self.benefit,
        }


def make_candidate(m, level, point, u, acq_value, cost, walltime) -> CandidateTask:
    if not cost > 0 or not walltime > 0:
        raise InvalidArgument("candidate cost and walltime must be positive")
    acq_value = max(float(acq_value), 0.0)
    return CandidateTask(m, level, point, tuple(u), acq_value, float(cost), float(walltime), acq_value / cost)


def _flat(mean, var):
    mean, var = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(var, dtype=float))
    return mean.shape, mean.ravel(), np.sqrt(np.maximum(var.ravel(), 0.0))


def ei(mean, var, best) -> np.ndarray:
    """Vectorized expected improvement for maximization."""
    shape, mean, sigma = _flat(mean, var)
    imp = mean - best
    out = np.maximum(imp, 0.0)
    ok = sigma > SIGMA_EPS
    z = imp[ok] / sigma[ok]
    out[ok] = np.maximum(imp[ok] * ndtr(z) + sigma[ok] * np.exp(-0.5 * z * z - _LOG_SQRT_2PI), 0.0)
    return out.reshape(shape)


def expected_improvement(mean: float, variance: float, best: float) -> float:
    return float(ei(float(mean), float(variance), float(best)))


def log_ei(mean, var, best) -> np.ndarray:
    """``log(EI)`` that stays finite deep in the tail (``-inf`` only for EI == 0 exactly)."""
    shape, mean, sigma = _flat(mean, var)
    imp = mean - best
    out = np.full(mean.shape, -np.inf)
    det = sigma <= SIGMA_EPS
    pos = det & (imp > 0)
    out[pos] = np.log(imp[pos])
    z = np.where(det, 0.0, imp / np.where(det, 1.0, sigma))
    head = ~det & (z > -1.0)
    with np.errstate(divide="ignore"):
        out[head] = np.log(ei(mean[head], sigma[head] ** 2, best))
    tail = ~det & (z <= -1.0)
    zt = z[tail]
    # lower tail: EI = sigma * phi(z) * (1 + z * Phi(z)/phi(z)), Mills ratio via erfcx
    h = 1.0 + zt * _SQRT_HALF_PI * erfcx(-zt / math.sqrt(2))
    with np.errstate(divide="ignore"):
        out[tail] = np.log(sigma[tail]) - 0.5 * zt * zt - _LOG_SQRT_2PI + np.log(np.maximum(h, 0.0))
    return out.reshape(shape)


def _correlation(chain, level: int, top_var, trust_level):
    """Correlation between a level-``level`` evaluation and the top-level prediction."""
    scale = np.ones_like(top_var)
    for k in range(level, len(chain) - 1):
        scale = scale * chain[k][2]
    epi = chain[level][1]
    denom = np.sqrt((epi + trust_level) * top_var)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0, np.abs(scale) * epi / denom, 0.0)
    return np.clip(corr, 0.0, 1.0)


def optimize_scores(s: MfSurrogate, U, level: int, best: float, log: bool = False) -> np.ndarray:
    top = s.L - 1
    chain = s.chain(U)
    top_mean, top_epi, _ = chain[top]
    top_var = top_epi + s.trust_var(U, top)
    if level == top:
        return log_ei(top_mean, top_var, best) if log else ei(top_mean, top_var, best)
    corr = _correlation(chain, level, top_var, s.trust_var(U, level))
    if log:
        with np.errstate(divide="ignore"):
            return log_ei(top_mean, top_var, best) + np.log(corr)
    return ei(top_mean, top_var, best) * corr


def variance_gap(s: MfSurrogate, U, level: int) -> np.ndarray:
    """Predictive variance at ``level`` minus that of the level below (if any)."""
    s._check_level(level)
    _, v = s.predict(U, level)
    if level == 0:
        return v
    _, v_lower = s.predict(U, level - 1)
    return v - v_lower


def variance_reduction_benefit(s: MfSurrogate, x, level: int) -> float:
    coords = np.asarray(getattr(x, "coords", x), dtype=float).reshape(1, -1)
    return float(variance_gap(s, s.domain.to_unit(coords), level)[0])


def acquisition(s: MfSurrogate, U, level: int, mode: str, best: Optional[float] = None) -> np.ndarray:
    """Acquisition value (before dividing by cost) at normalized points."""
    if mode == "optimize":
        if best is None:
            raise InvalidArgument("optimize mode needs the incumbent best value")
        return optimize_scores(s, U, level, best)
    if mode == "reduce_variance":
        return np.maximum(variance_gap(s, U, level), 0.0)
    raise InvalidArgument(f"unknown acquisition mode {mode!r}; expected one of {MODES}")


def allowed_mask(U, level: FidelityLevel, repulsion) -> np.ndarray:
    mask = level.feasible(U)
    if len(repulsion):
        R = np.atleast_2d(np.asarray(repulsion, dtype=float))
        d2 = np.sum((U[:, None, :] - R[None, :, :]) ** 2, axis=2)
        mask &= np.all(d2 > REPULSION_RADIUS**2, axis=1)
    return mask


def _maximize(score, dim, allowed, seed, n_starts, max_evals, level_index):
    def objective(U):
        vals = np.full(len(U), -np.inf)
        ok = allowed(U)
        if np.any(ok):
            vals[ok] = score(U[ok])
        vals[np.isnan(vals)] = -np.inf
        return vals

    lo, hi = np.zeros(dim), np.ones(dim)
    starts = sobol_starts(n_starts, lo, hi, seed)
    ok = allowed(starts)
    if not np.all(ok):
        pool = sobol_starts(1024, lo, hi, seed + 1)
        pool = pool[allowed(pool)]
        if len(pool) == 0 and not np.any(ok):
            raise NoCandidates(level_index)
        starts = np.vstack([starts[ok], pool])[:n_starts]
    res = pattern_search(objective, starts, lo, hi, step=0.125, min_step=1e-4, max_evals=max_evals)
    if not np.isfinite(res.f).any() and not np.any(allowed(res.x)):
        raise NoCandidates(level_index)
    return res.x[res.best]


def _seed(seed: int, level: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, level, k]).generate_state(1)[0])


def propose_batch(s: MfSurrogate, counts: Sequence[int], mode: str, seed: int, levels: Sequence[FidelityLevel],
                  *, best: Optional[float] = None, repulsion=(), n_starts: int = N_STARTS,
                  max_evals: int = EVALS_PER_START) -> list:
    """Propose ``counts[l]`` candidates per level with placeholder retraining.

    After each pick the scratch surrogate is conditioned on its own mean at
    the picked point, which suppresses the variance there and moves the
    next pick elsewhere. ``s`` itself is never modified.
    """
    if mode not in MODES:
        raise InvalidArgument(f"unknown acquisition mode {mode!r}; expected one of {MODES}")
    if len(counts) != s.L or len(levels) != s.L:
        raise InvalidArgument(f"need counts and level descriptions for all {s.L} levels")
    if any(c < 0 for c in counts):
        raise InvalidArgument("candidate counts must be non-negative")
    if mode == "optimize" and best is None:
        raise InvalidArgument("optimize mode needs the incumbent best value")
    dim = s.dim
    out = []
    for lev, count in enumerate(counts):
        scratch = s
        incumbent = best
        spec = levels[lev]
        for m in range(count):
            if mode == "optimize":
                score = lambda U, _s=scratch, _b=incumbent: optimize_scores(_s, U, lev, _b, log=True)
            else:
                score = lambda U, _s=scratch: np.maximum(variance_gap(_s, U, lev), 0.0)
            u = _maximize(score, dim, lambda U: allowed_mask(U, spec, repulsion), _seed(seed, lev, m),
                          n_starts, max_evals, lev)
            value = float(acquisition(scratch, u[None, :], lev, mode, incumbent)[0])
            point = DesignPoint(tuple(s.domain.from_unit(u)))
            out.append(make_candidate(m, lev, point, u, value, spec.cost_model.cost(u), spec.cost_model.time(u)))
            if mode == "optimize" and lev == s.L - 1:
                top_mean, _ = scratch.epistemic(u[None, :], lev)
                incumbent = max(incumbent, float(top_mean[0]))
            scratch = scratch.with_placeholder(u, lev)
    return out


__all__ = [
    "CandidateTask",
    "acquisition",
    "allowed_mask",
    "ei",
    "expected_improvement",
    "log_ei",
    "make_candidate",
    "optimize_scores",
    "propose_batch",
    "variance_gap",
    "variance_reduction_benefit",
]
