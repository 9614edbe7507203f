"""Design space, fidelity-hierarchy description and observation records.

All value types here are frozen dataclasses so they can be shared freely
between the driver, the broker and worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DomainViolation, InvalidArgument

# relative slack when checking bounds, so that denormalize(normalize(x)) stays in-box
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class DesignPoint:
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)


def _as_point(x) -> DesignPoint:
    return x if isinstance(x, DesignPoint) else DesignPoint(tuple(np.ravel(x)))


@dataclass(frozen=True)
class Domain:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) == 0 or len(lo) != len(hi):
            raise InvalidArgument("lower and upper must be non-empty and of equal length")
        for j, (a, b) in enumerate(zip(lo, hi)):
            if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
                raise InvalidArgument(f"bound {j}: need finite lower < upper, got [{a}, {b}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "Domain":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def contains(self, x) -> bool:
        x = np.asarray(_as_point(x).coords)
        if x.shape != (self.dim,):
            return False
        slack = _BOUND_SLACK * np.maximum(1.0, np.abs(self.width))
        return bool(np.all(x >= np.asarray(self.lower) - slack) and np.all(x <= np.asarray(self.upper) + slack))

    def check(self, x) -> DesignPoint:
        p = _as_point(x)
        if p.dim != self.dim:
            raise DomainViolation(f"point has dimension {p.dim}, domain has {self.dim}")
        if not self.contains(p):
            raise DomainViolation(f"point {p.coords} outside box {self.lower}..{self.upper}")
        return p

    # array forms used on hot paths; no bound checks
    def to_unit(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - np.asarray(self.lower)) / self.width

    def from_unit(self, U) -> np.ndarray:
        return np.asarray(self.lower) + np.asarray(U, dtype=float) * self.width


def normalize(point, domain: Domain) -> DesignPoint:
    """Map a point affinely from the domain box onto [0, 1]^d."""
    p = domain.check(point)
    u = np.clip(domain.to_unit(p.coords), 0.0, 1.0)
    return DesignPoint(tuple(u))


def denormalize(point, domain: Domain) -> DesignPoint:
    u = _as_point(point)
    if u.dim != domain.dim:
        raise DomainViolation(f"point has dimension {u.dim}, domain has {domain.dim}")
    if not Domain.unit(domain.dim).contains(u):
        raise DomainViolation(f"normalized point {u.coords} outside [0, 1]^{domain.dim}")
    return DesignPoint(tuple(domain.from_unit(u.coords)))


def lhs_unit(n: int, dim: int, seed: int) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in [0, 1]^dim."""
    if n < 1:
        raise InvalidArgument(f"LHS needs n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    U = np.empty((n, dim))
    for j in range(dim):
        U[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return U


def lhs_design(n: int, domain: Domain, seed: int) -> list:
    """Latin hypercube design in problem units, one point per stratum per axis."""
    U = lhs_unit(n, domain.dim, seed)
    return [DesignPoint(tuple(row)) for row in domain.from_unit(U)]


@dataclass(frozen=True)
class LinearConstraints:
    """Feasible set ``{u : A u <= b}`` over normalized coordinates."""

    A: tuple
    b: tuple

    def __post_init__(self):
        A = tuple(tuple(float(v) for v in row) for row in self.A)
        b = tuple(float(v) for v in self.b)
        if len(A) != len(b):
            raise InvalidArgument("constraint matrix and bound vector lengths differ")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def contains(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if not self.A:
            return np.ones(len(U), dtype=bool)
        return np.all(U @ np.asarray(self.A).T <= np.asarray(self.b) + 1e-12, axis=1)

    def to_dict(self) -> dict:
        return {"A": [list(r) for r in self.A], "b": list(self.b)}


@dataclass(frozen=True)
class CostModel:
    """Resource cost and walltime of one evaluation.

    ``multiplier`` holds linear coefficients ``(c0, c1, ..., cd)`` over
    normalized coordinates; both cost and walltime scale by
    ``c0 + sum_j c_j u_j``. Linear keeps the domain-wide maximum exact
    (it sits on a corner).
    """

    base_cost: float
    walltime: float
    multiplier: Optional[tuple] = None

    def __post_init__(self):
        if not (self.base_cost > 0 and math.isfinite(self.base_cost)):
            raise InvalidArgument(f"base_cost must be positive, got {self.base_cost}")
        if not (self.walltime > 0 and math.isfinite(self.walltime)):
            raise InvalidArgument(f"walltime must be positive, got {self.walltime}")
        if self.multiplier is not None:
            m = tuple(float(v) for v in self.multiplier)
            if len(m) < 1:
                raise InvalidArgument("multiplier needs at least the constant term")
            if m[0] + sum(min(c, 0.0) for c in m[1:]) <= 0:
                raise InvalidArgument("cost multiplier must stay positive on the unit box")
            object.__setattr__(self, "multiplier", m)
        object.__setattr__(self, "base_cost", float(self.base_cost))
        object.__setattr__(self, "walltime", float(self.walltime))

    def check_dim(self, dim: int) -> None:
        if self.multiplier is not None and len(self.multiplier) != dim + 1:
            raise InvalidArgument(f"cost multiplier needs {dim + 1} coefficients, got {len(self.multiplier)}")

    def factor(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if self.multiplier is None:
            return np.ones(len(U))
        m = np.asarray(self.multiplier)
        return m[0] + U @ m[1:]

    def cost(self, u) -> float:
        return float(self.base_cost * self.factor(u)[0])

    def time(self, u) -> float:
        return float(self.walltime * self.factor(u)[0])

    def max_factor(self) -> float:
        if self.multiplier is None:
            return 1.0
        return self.multiplier[0] + sum(max(c, 0.0) for c in self.multiplier[1:])

    def max_walltime(self) -> float:
        return self.walltime * self.max_factor()

    def max_cost(self) -> float:
        return self.base_cost * self.max_factor()


FeatureSpec = Union[str, Callable]


@dataclass(frozen=True)
class TrustPrior:
    """Expert-supplied variance inflation ``c1 + c2*k + c3*k**2``.

    ``feature`` selects the scalar ``k(x)``: ``"zero"``, ``"coord:j"``
    (coordinate j in problem units) or ``"unit:j"`` (coordinate j mapped to
    [0, 1]). A callable taking an ``(n, d)`` array of problem-unit points is
    accepted for programmatic use but cannot be serialized.
    """

    coeffs: tuple = (0.0, 0.0, 0.0)
    feature: FeatureSpec = "zero"

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if len(c) != 3:
            raise InvalidArgument(f"trust prior needs exactly 3 coefficients, got {len(c)}")
        if any(v < 0 or not math.isfinite(v) for v in c):
            raise InvalidArgument(f"trust coefficients must be finite and non-negative, got {c}")
        object.__setattr__(self, "coeffs", c)
        if isinstance(self.feature, str):
            _parse_feature(self.feature)

    def kappa(self, X, domain: Optional[Domain] = None) -> np.ndarray:
        """Feature values at problem-unit points ``X`` of shape (n, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if callable(self.feature):
            return np.asarray(self.feature(X), dtype=float).reshape(len(X))
        kind, j = _parse_feature(self.feature)
        if kind == "zero":
            return np.zeros(len(X))
        if kind == "coord":
            return X[:, j]
        if domain is None:
            raise InvalidArgument("unit-coordinate trust feature needs the domain")
        return (X[:, j] - domain.lower[j]) / (domain.upper[j] - domain.lower[j])

    def variance(self, X, domain: Optional[Domain] = None) -> np.ndarray:
        k = self.kappa(X, domain)
        c1, c2, c3 = self.coeffs
        return c1 + c2 * k + c3 * k * k

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0, 0.0, 0.0)

    def check_domain(self, domain: Domain) -> None:
        """Reject priors that go negative somewhere in the box."""
        if callable(self.feature):
            return
        kind, j = _parse_feature(self.feature)
        if kind == "zero":
            lo = hi = 0.0
        elif kind == "coord":
            if j >= domain.dim:
                raise InvalidArgument(f"trust feature {self.feature!r} exceeds dimension {domain.dim}")
            lo, hi = domain.lower[j], domain.upper[j]
        else:
            if j >= domain.dim:
                raise InvalidArgument(f"trust feature {self.feature!r} exceeds dimension {domain.dim}")
            lo, hi = 0.0, 1.0
        c1, c2, c3 = self.coeffs
        ks = [lo, hi]
        if c3 > 0 and lo < -c2 / (2 * c3) < hi:
            ks.append(-c2 / (2 * c3))
        if min(c1 + c2 * k + c3 * k * k for k in ks) < 0:
            raise InvalidArgument(f"trust variance negative inside the domain for feature {self.feature!r}")

    def to_dict(self) -> dict:
        if callable(self.feature):
            raise InvalidArgument("callable trust features cannot be serialized")
        return {"coeffs": list(self.coeffs), "feature": self.feature}


def _parse_feature(spec: str):
    if spec == "zero":
        return "zero", 0
    kind, _, idx = spec.partition(":")
    if kind in ("coord", "unit") and idx.isdigit():
        return kind, int(idx)
    raise InvalidArgument(f"unknown trust feature {spec!r}; expected zero, coord:j or unit:j")


@dataclass(frozen=True)
class FidelityLevel:
    index: int
    name: str
    cost_model: CostModel
    trust_prior: TrustPrior = field(default_factory=TrustPrior)
    queue_name: str = "default"
    feasibility: Optional[LinearConstraints] = None

    def feasible(self, U) -> np.ndarray:
        U = np.atleast_2d(U)
        if self.feasibility is None:
            return np.ones(len(U), dtype=bool)
        return self.feasibility.contains(U)


def check_hierarchy(levels: Sequence[FidelityLevel], domain: Domain) -> None:
    if not levels:
        raise InvalidArgument("a hierarchy needs at least one level")
    for k, lev in enumerate(levels):
        if lev.index != k:
            raise InvalidArgument(f"level indices must be contiguous from 0; position {k} has index {lev.index}")
        lev.cost_model.check_dim(domain.dim)
        lev.trust_prior.check_domain(domain)


@dataclass(frozen=True)
class Observation:
    point: DesignPoint
    level: int
    value: float
    noise_var: float = 0.0
    feasible: bool = True
    task_id: str = ""
    walltime_actual: float = 0.0

    def __post_init__(self):
        if not self.noise_var >= 0:
            raise InvalidArgument(f"noise_var must be non-negative, got {self.noise_var}")
        if self.feasible and not math.isfinite(self.value):
            raise InvalidArgument("feasible observations need a finite value")
        object.__setattr__(self, "point", _as_point(self.point))

    def to_dict(self) -> dict:
        return {
            "point": list(self.point.coords),
            "level": self.level,
            "value": self.value if math.isfinite(self.value) else None,
            "noise_var": self.noise_var,
            "feasible": self.feasible,
            "task_id": self.task_id,
            "walltime_actual": self.walltime_actual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Observation":
        value = d["value"]
        return cls(
            point=DesignPoint(tuple(d["point"])),
            level=int(d["level"]),
            value=float("nan") if value is None else float(value),
            noise_var=float(d["noise_var"]),
            feasible=bool(d["feasible"]),
            task_id=d["task_id"],
            walltime_actual=float(d["walltime_actual"]),
        )
