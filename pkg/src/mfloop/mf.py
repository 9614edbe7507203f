"""Autoregressive multi-fidelity surrogate.

Level 0 is a plain GP. Every higher level ``l`` predicts
``rho(x) * m_{l-1}(x) + delta(x) (+ residual GP)`` where ``rho`` and
``delta`` are low-degree polynomials over normalized coordinates fitted by
least squares, and the residual GP (or a constant fallback) carries the
bridge's own epistemic uncertainty. Trust priors add expert-specified
variance at the queried level only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import gp as gplib
from .domain import Domain, TrustPrior
from .errors import InvalidArgument, MissingData

log = logging.getLogger(__name__)

MAX_DEGREE = 2
MIN_RESIDUAL_GP_POINTS = 3


def n_poly_terms(dim: int, degree: int) -> int:
    return sum(len(list(combinations_with_replacement(range(dim), k))) for k in range(degree + 1))


def poly_basis(U, degree: int) -> np.ndarray:
    """Monomials of total degree <= ``degree``: 1, u_j, u_j*u_k (j <= k)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if not 0 <= degree <= MAX_DEGREE:
        raise InvalidArgument(f"bridge degree must be in 0..{MAX_DEGREE}, got {degree}")
    cols = [np.ones(len(U))]
    for k in range(1, degree + 1):
        for idx in combinations_with_replacement(range(U.shape[1]), k):
            cols.append(np.prod(U[:, list(idx)], axis=1))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class Bridge:
    rho_coeffs: tuple
    delta_coeffs: tuple
    degree: int = 0
    residual_gp: Optional[gplib.GpModel] = None
    # variance added when there is no residual GP
    residual_var: float = 0.0
    status: str = "ok"

    def __post_init__(self):
        object.__setattr__(self, "rho_coeffs", tuple(float(c) for c in self.rho_coeffs))
        object.__setattr__(self, "delta_coeffs", tuple(float(c) for c in self.delta_coeffs))

    @classmethod
    def identity(cls, dim: int = 1) -> "Bridge":
        return cls((1.0,), (0.0,), 0)

    def rho(self, U) -> np.ndarray:
        return poly_basis(U, self.degree) @ np.asarray(self.rho_coeffs)

    def delta(self, U) -> np.ndarray:
        return poly_basis(U, self.degree) @ np.asarray(self.delta_coeffs)

    def apply(self, U, lower_mean, lower_var):
        """Compose with a lower-level prediction; returns (mean, epistemic var, rho)."""
        rho = self.rho(U)
        mean = rho * lower_mean + self.delta(U)
        var = rho * rho * lower_var
        if self.residual_gp is not None:
            rm, rv = gplib.predict(self.residual_gp, U)
            mean = mean + rm
            var = var + rv
        else:
            var = var + self.residual_var
        return mean, var, rho

    def summary(self) -> dict:
        return {
            "degree": self.degree,
            "rho_coeffs": list(self.rho_coeffs),
            "delta_coeffs": list(self.delta_coeffs),
            "residual_gp": None if self.residual_gp is None else self.residual_gp.summary(),
            "residual_var": self.residual_var,
            "status": self.status,
        }


def _lstsq(A, y):
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    return coef, rank


def fit_bridge_coeffs(U, lower_mean, y, degree: int):
    """Least-squares ``(rho, delta, degree, status)``, stepping down when rank-deficient."""
    n = len(y)
    for deg, status in ((degree, "ok"), (0, "degraded")):
        P = poly_basis(U, deg)
        A = np.hstack([P * lower_mean[:, None], P])
        if n >= A.shape[1]:
            coef, rank = _lstsq(A, y)
            if rank == A.shape[1]:
                k = P.shape[1]
                if deg != degree:
                    log.warning("bridge design rank-deficient at degree %d; fell back to degree 0", degree)
                return tuple(coef[:k]), tuple(coef[k:]), deg, status
    # not even a constant scale is identifiable: keep rho = 1 and fit the offset
    log.warning("bridge scale not identifiable from %d points; fitting an offset only", n)
    return (1.0,), (float(np.mean(y - lower_mean)),), 0, "offset_only"


def fit_bridge(lower_predict: Callable, U, y, degree: int = 0, point_noise=None, *,
               noise_floor: float = 0.0, seed: int = 0) -> Bridge:
    """Fit ``y ~ rho(u) * lower(u) + delta(u)`` on high-fidelity data.

    ``lower_predict`` maps normalized points ``(n, d)`` to ``(mean, var)``.
    With three or more points a GP is fitted to what the polynomials leave
    over; otherwise the sample variance of the residuals stands in for it.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) == 0:
        raise MissingData("cannot fit a bridge without high-fidelity observations")
    if not 0 <= degree <= MAX_DEGREE:
        raise InvalidArgument(f"bridge degree must be in 0..{MAX_DEGREE}, got {degree}")
    lower_mean, _ = lower_predict(U)
    rho, delta, deg, status = fit_bridge_coeffs(U, np.asarray(lower_mean), y, degree)
    bridge = Bridge(rho, delta, deg, status=status)
    resid = y - (bridge.rho(U) * lower_mean + bridge.delta(U))
    if len(y) >= MIN_RESIDUAL_GP_POINTS:
        rgp = gplib.fit_gp(U, resid, noise_floor=noise_floor, seed=seed, point_noise=point_noise)
        return replace(bridge, residual_gp=rgp)
    dof = len(y) - 2 * n_poly_terms(U.shape[1], deg) if status != "offset_only" else len(y) - 1
    if dof >= 1:
        rvar = float(np.sum(resid**2) / dof)
    elif len(y) >= 2:
        # polynomials interpolate: residuals carry no scale information
        rvar = float(np.var(y, ddof=1))
    else:
        rvar = float((y[0] - lower_mean[0]) ** 2)
    return replace(bridge, residual_var=rvar)


def auto_degree(n_hf: int, dim: int) -> int:
    return 1 if n_hf >= 2 * (dim + 1) else 0


@dataclass(frozen=True)
class LevelData:
    """Training data for one level: normalized inputs, targets, noise variances."""

    U: np.ndarray
    y: np.ndarray
    noise: np.ndarray = None

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.U, dtype=float)) if len(self.U) else np.empty((0, 0))
        y = np.asarray(self.y, dtype=float).ravel()
        noise = np.zeros(len(y)) if self.noise is None else np.asarray(self.noise, dtype=float).ravel()
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise", noise)

    @property
    def n(self) -> int:
        return len(self.y)

    def append(self, U, y, noise=None) -> "LevelData":
        U = np.atleast_2d(np.asarray(U, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        noise = np.zeros(len(y)) if noise is None else np.asarray(noise, dtype=float).ravel()
        if self.n == 0:
            return LevelData(U, y, noise)
        return LevelData(np.vstack([self.U, U]), np.concatenate([self.y, y]), np.concatenate([self.noise, noise]))


@dataclass(frozen=True, eq=False)
class MfSurrogate:
    """Fitted hierarchy: ``base`` GP plus ``bridges[l]`` linking level l to l+1."""

    base: gplib.GpModel
    bridges: tuple = ()
    trust: tuple = ()
    domain: Optional[Domain] = None

    def __post_init__(self):
        object.__setattr__(self, "bridges", tuple(self.bridges))
        trust = tuple(self.trust) if self.trust else tuple(TrustPrior() for _ in range(len(self.bridges) + 1))
        object.__setattr__(self, "trust", trust)
        if len(self.trust) != self.L:
            raise InvalidArgument(f"need {self.L} trust priors, got {len(self.trust)}")
        if self.domain is None:
            object.__setattr__(self, "domain", Domain.unit(self.base.dim))

    @property
    def L(self) -> int:
        return len(self.bridges) + 1

    @property
    def dim(self) -> int:
        return self.base.dim

    def _check_level(self, level: int) -> None:
        if not 0 <= level < self.L:
            raise InvalidArgument(f"level {level} out of range for a {self.L}-level hierarchy")

    def chain(self, U, top: Optional[int] = None):
        """Per-level ``(mean, epistemic var, rho into next level)`` up to ``top``."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        top = self.L - 1 if top is None else top
        mean, var = gplib.predict(self.base, U)
        out = [(mean, var, None)]
        for b in self.bridges[:top]:
            mean, var, rho = b.apply(U, mean, var)
            out[-1] = (out[-1][0], out[-1][1], rho)
            out.append((mean, var, None))
        return out

    def epistemic(self, U, level: int):
        self._check_level(level)
        mean, var, _ = self.chain(U, level)[level]
        return mean, var

    def trust_var(self, U, level: int) -> np.ndarray:
        prior = self.trust[level]
        U = np.atleast_2d(U)
        if prior.is_zero:
            return np.zeros(len(U))
        return prior.variance(self.domain.from_unit(U), self.domain)

    def predict(self, U, level: int):
        """Vectorized mean and total variance (epistemic + trust) in normalized space."""
        mean, var = self.epistemic(U, level)
        return mean, var + self.trust_var(U, level)

    def with_placeholder(self, u, level: int) -> "MfSurrogate":
        """Condition on the surrogate's own mean at ``u`` for ``level``.

        The placeholder goes into the residual GP of the bridge feeding
        ``level``; when that bridge has no residual GP it is pushed down to
        the level below, ending at the base GP.
        """
        self._check_level(level)
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if level == 0:
            m, _ = gplib.predict(self.base, u)
            return replace(self, base=gplib.add_data(self.base, u, m))
        b = self.bridges[level - 1]
        if b.residual_gp is None:
            return self.with_placeholder(u, level - 1)
        rm, _ = gplib.predict(b.residual_gp, u)
        bridges = list(self.bridges)
        bridges[level - 1] = replace(b, residual_gp=gplib.add_data(b.residual_gp, u, rm))
        return replace(self, bridges=tuple(bridges))

    def summary(self) -> dict:
        return {
            "levels": self.L,
            "base_gp": self.base.summary(),
            "bridges": [b.summary() for b in self.bridges],
            "trust": [t.to_dict() if not callable(t.feature) else {"coeffs": list(t.coeffs), "feature": "callable"}
                      for t in self.trust],
        }


def trust_variance(prior: TrustPrior, x, domain: Optional[Domain] = None) -> float:
    """``c1 + c2*k(x) + c3*k(x)**2`` at a problem-unit point."""
    coords = np.asarray(getattr(x, "coords", x), dtype=float).reshape(1, -1)
    return float(prior.variance(coords, domain)[0])


def mf_predict(s: MfSurrogate, x, level: int):
    """Mean and variance at problem-unit point ``x`` on fidelity ``level``."""
    s._check_level(level)
    coords = np.asarray(getattr(x, "coords", x), dtype=float).reshape(1, -1)
    if coords.shape[1] != s.dim:
        raise InvalidArgument(f"point dimension {coords.shape[1]} does not match surrogate dimension {s.dim}")
    u = s.domain.to_unit(coords)
    mean, var = s.predict(u, level)
    return float(mean[0]), float(var[0])


DegreeSpec = Union[int, str]


def fit_mf(data: Sequence[LevelData], *, domain: Optional[Domain] = None, trust: Sequence[TrustPrior] = (),
           degrees: Union[DegreeSpec, Sequence[DegreeSpec]] = "auto", noise_floor: float = 0.0,
           seed: int = 0) -> MfSurrogate:
    """Recursive fit: base GP on level 0, then each bridge in level order."""
    if not data:
        raise InvalidArgument("need data for at least one level")
    if data[0].n == 0:
        raise MissingData("level 0 has no feasible observations")
    L = len(data)
    if isinstance(degrees, (int, str)):
        degrees = [degrees] * (L - 1)
    if len(degrees) != L - 1:
        raise InvalidArgument(f"need {L - 1} bridge degrees, got {len(degrees)}")
    dim = data[0].U.shape[1]
    base = gplib.fit_gp(data[0].U, data[0].y, noise_floor=noise_floor, seed=seed, point_noise=data[0].noise)
    s = MfSurrogate(base, (), tuple(trust[:1]) if trust else (), domain)
    for lev in range(1, L):
        d = data[lev]
        if d.n == 0:
            raise MissingData(f"level {lev} has no feasible observations to fit its bridge")
        deg = degrees[lev - 1]
        deg = auto_degree(d.n, dim) if deg == "auto" else int(deg)
        lower = s
        bridge = fit_bridge(lambda U, _s=lower, _l=lev - 1: _s.epistemic(U, _l), d.U, d.y, deg, d.noise,
                            noise_floor=noise_floor, seed=seed + 7919 * lev)
        s = MfSurrogate(base, s.bridges + (bridge,), tuple(trust[: lev + 1]) if trust else (), domain)
    return s


def recondition(template: MfSurrogate, data: Sequence[LevelData]) -> MfSurrogate:
    """Re-condition every GP of ``template`` on ``data`` without refitting.

    Kernel hyperparameters, standardization constants and bridge
    polynomials stay as calibrated, so posterior variances can only shrink
    as data are added.
    """
    if len(data) != template.L:
        raise InvalidArgument(f"need data for {template.L} levels, got {len(data)}")
    b0 = template.base
    base = gplib.condition_on(b0.params, data[0].U, data[0].y, data[0].noise,
                              y_mean=b0.y_mean, y_std=b0.y_std, noise_pinned=b0.noise_pinned)
    s = replace(template, base=base, bridges=(), trust=template.trust[:1])
    for lev, b in enumerate(template.bridges, start=1):
        d = data[lev]
        if b.residual_gp is not None and d.n > 0:
            lower_mean, _ = s.epistemic(d.U, lev - 1)
            resid = d.y - (b.rho(d.U) * lower_mean + b.delta(d.U))
            r0 = b.residual_gp
            rgp = gplib.condition_on(r0.params, d.U, resid, d.noise, y_mean=r0.y_mean, y_std=r0.y_std,
                                     noise_pinned=r0.noise_pinned)
            b = replace(b, residual_gp=rgp)
        s = replace(s, bridges=s.bridges + (b,), trust=template.trust[: lev + 1])
    return s


__all__ = [
    "Bridge",
    "LevelData",
    "MfSurrogate",
    "auto_degree",
    "fit_bridge",
    "fit_bridge_coeffs",
    "fit_mf",
    "mf_predict",
    "n_poly_terms",
    "poly_basis",
    "recondition",
    "trust_variance",
]
