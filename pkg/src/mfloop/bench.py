"""Synthetic multi-fidelity problems with known ground truth.

Every problem, built-in or user supplied, is described by a plain dict
(the same structure a problem file holds), so campaigns can embed the full
problem in their checkpoints.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .domain import (
    CostModel,
    DesignPoint,
    Domain,
    FidelityLevel,
    LinearConstraints,
    TrustPrior,
    check_hierarchy,
)
from .errors import ConfigurationError, InvalidArgument

DIRECTIONS = ("maximize", "minimize")

# ---------------------------------------------------------------- model specs


def _poly(spec):
    terms = [(float(t["coef"]), tuple(int(p) for p in t["powers"])) for t in spec.get("terms", [])]
    const = float(spec.get("constant", 0.0))

    def f(X):
        out = np.full(len(X), const)
        for coef, powers in terms:
            out = out + coef * np.prod(X[:, : len(powers)] ** np.asarray(powers), axis=1)
        return out

    return f


def _gaussians(spec):
    const = float(spec.get("constant", 0.0))
    terms = []
    for t in spec.get("terms", []):
        terms.append((float(t["amplitude"]), np.asarray(t["center"], dtype=float), np.asarray(t["width"], dtype=float)))

    def f(X):
        out = np.full(len(X), const)
        for amp, c, w in terms:
            out = out + amp * np.exp(-0.5 * np.sum(((X - c) / w) ** 2, axis=1))
        return out

    return f


def _forrester(spec):
    j = int(spec.get("coord", 0))

    def f(X):
        x = X[:, j]
        return (6 * x - 2) ** 2 * np.sin(12 * x - 4)

    return f


def _transform(spec):
    base = build_model(spec["base"])
    scale = float(spec.get("scale", 1.0))
    add = build_model(spec["add"]) if "add" in spec else None

    def f(X):
        out = scale * base(X)
        return out if add is None else out + add(X)

    return f


def _sum(spec):
    parts = [build_model(p) for p in spec["parts"]]

    def f(X):
        return sum(p(X) for p in parts)

    return f


_MODEL_KINDS = {
    "polynomial": _poly,
    "gaussian_sum": _gaussians,
    "forrester": _forrester,
    "transform": _transform,
    "sum": _sum,
}


def build_model(spec: dict) -> Callable:
    """Vectorized evaluator ``(n, d) -> (n,)`` over problem-unit coordinates."""
    kind = spec.get("kind")
    if kind not in _MODEL_KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {sorted(_MODEL_KINDS)}")
    return _MODEL_KINDS[kind](spec)


def _constraints(spec) -> Optional[LinearConstraints]:
    if spec is None:
        return None
    return LinearConstraints(tuple(tuple(r) for r in spec["A"]), tuple(spec["b"]))


# ---------------------------------------------------------------- problems


def _key_int(task_id) -> int:
    return int.from_bytes(hashlib.sha256(str(task_id).encode()).digest()[:8], "little")


def noise_stream(seed: int, task_id) -> np.random.Generator:
    """Counter-style stream keyed by (seed, task id), independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, _key_int(task_id)]))


@dataclass(frozen=True)
class LevelModel:
    func: Callable
    noise_var: Optional[Callable] = None
    hidden: Optional[LinearConstraints] = None


@dataclass(frozen=True, eq=False)
class BenchmarkProblem:
    name: str
    domain: Domain
    levels: tuple
    models: tuple
    direction: str = "maximize"
    true_optimum: Optional[tuple] = None
    spec: Optional[dict] = None
    bridge_degrees: Optional[tuple] = None

    @property
    def L(self) -> int:
        return len(self.levels)

    @property
    def sign(self) -> float:
        """Multiply values by this to turn the problem into maximization."""
        return 1.0 if self.direction == "maximize" else -1.0

    def value(self, X, level: int) -> np.ndarray:
        """Noise-free response at problem-unit points."""
        return self.models[level].func(np.atleast_2d(np.asarray(X, dtype=float)))

    def noise_var(self, X, level: int) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        nv = self.models[level].noise_var
        return np.zeros(len(X)) if nv is None else np.maximum(nv(X), 0.0)

    def evaluate(self, point, level: int, seed: int = 0, task_id="") -> tuple:
        """``(value, noise_var, feasible)`` for one evaluation; pure given (point, seed, task id)."""
        p = self.domain.check(point)
        X = np.asarray(p.coords)[None, :]
        u = self.domain.to_unit(X)
        lev = self.levels[level]
        model = self.models[level]
        if not lev.feasible(u)[0] or (model.hidden is not None and not model.hidden.contains(u)[0]):
            return float("nan"), 0.0, False
        value = float(model.func(X)[0])
        nv = float(self.noise_var(X, level)[0])
        if nv > 0:
            value += float(np.sqrt(nv) * noise_stream(seed, task_id).standard_normal())
        return value, nv, True

    def restrict(self, indices: Sequence[int]) -> "BenchmarkProblem":
        """Sub-hierarchy made of the given levels, re-indexed from 0."""
        indices = list(indices)
        if not indices or sorted(set(indices)) != indices or indices[-1] >= self.L:
            raise InvalidArgument(f"level subset {indices} must be increasing indices below {self.L}")
        spec = None
        if self.spec is not None:
            spec = copy.deepcopy(self.spec)
            spec["levels"] = [spec["levels"][k] for k in indices]
            spec.pop("bridges", None)
        levels = tuple(
            FidelityLevel(n, self.levels[k].name, self.levels[k].cost_model, self.levels[k].trust_prior,
                          self.levels[k].queue_name, self.levels[k].feasibility)
            for n, k in enumerate(indices)
        )
        keep_opt = indices[-1] == self.L - 1
        return BenchmarkProblem(self.name, self.domain, levels, tuple(self.models[k] for k in indices),
                                self.direction, self.true_optimum if keep_opt else None, spec, None)


def problem_from_dict(spec: dict) -> BenchmarkProblem:
    """Build a problem from its declarative description (see ``configs/*.toml``)."""
    try:
        dom = spec["domain"]
        domain = Domain(tuple(dom["lower"]), tuple(dom["upper"]))
        direction = spec.get("direction", "maximize")
        if direction not in DIRECTIONS:
            raise ConfigurationError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
        levels, models = [], []
        for k, ls in enumerate(spec["levels"]):
            cost = ls["cost"]
            trust = ls.get("trust", {})
            levels.append(FidelityLevel(
                index=k,
                name=ls.get("name", f"level{k}"),
                cost_model=CostModel(cost["base"], cost["walltime"],
                                     tuple(cost["multiplier"]) if "multiplier" in cost else None),
                trust_prior=TrustPrior(tuple(trust.get("coeffs", (0.0, 0.0, 0.0))), trust.get("feature", "zero")),
                queue_name=ls.get("queue", f"q{k}"),
                feasibility=_constraints(ls.get("feasibility")),
            ))
            noise = build_model(ls["noise"]) if "noise" in ls else None
            models.append(LevelModel(build_model(ls["model"]), noise, _constraints(ls.get("hidden"))))
        check_hierarchy(levels, domain)
        opt = spec.get("true_optimum")
        true_opt = (DesignPoint(tuple(opt["point"])), float(opt["value"])) if opt else None
        degrees = None
        if "bridges" in spec:
            if len(spec["bridges"]) != len(levels) - 1:
                raise ConfigurationError(
                    f"hierarchy has {len(levels)} levels and so needs {len(levels) - 1} bridges, "
                    f"got {len(spec['bridges'])}")
            degrees = tuple(b.get("degree", "auto") for b in spec["bridges"])
    except KeyError as exc:
        raise ConfigurationError(f"problem description is missing key {exc.args[0]!r}") from exc
    except InvalidArgument as exc:
        raise ConfigurationError(str(exc)) from exc
    return BenchmarkProblem(spec.get("name", "custom"), domain, tuple(levels), tuple(models), direction,
                            true_opt, copy.deepcopy(spec), degrees)


# ---------------------------------------------------------------- built-ins

FORRESTER_SPEC = {
    "name": "forrester_pair",
    "direction": "minimize",
    "domain": {"lower": [0.0], "upper": [1.0]},
    "levels": [
        {
            "name": "low",
            "queue": "lf",
            "cost": {"base": 1.0, "walltime": 1.0},
            # 0.5 * high + 10 (x - 0.5) - 5
            "model": {"kind": "transform", "base": {"kind": "forrester"}, "scale": 0.5,
                      "add": {"kind": "polynomial", "constant": -10.0, "terms": [{"coef": 10.0, "powers": [1]}]}},
        },
        {
            "name": "high",
            "queue": "hf",
            "cost": {"base": 10.0, "walltime": 10.0},
            "model": {"kind": "forrester"},
        },
    ],
    "true_optimum": {"point": [0.7572487585232999], "value": -6.0207400557670825},
}

EH_SPEC = {
    "name": "eh_analogue",
    "direction": "maximize",
    "domain": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]},
    "levels": [
        {
            "name": "reactor",
            "queue": "sim",
            # walltime grows by up to 75% across the box
            "cost": {"base": 1.0, "walltime": 60.0, "multiplier": [1.0, 0.5, 0.25]},
            "model": {
                "kind": "gaussian_sum",
                "terms": [
                    {"amplitude": 1.0, "center": [0.62, 0.38], "width": [0.16, 0.16]},
                    {"amplitude": 0.45, "center": [0.40, 0.62], "width": [0.26, 0.26]},
                ],
            },
        }
    ],
    "true_optimum": {"point": [0.60197605, 0.39966249], "value": 1.2185924074222652},
}

STOCHASTIC_SPEC = {
    "name": "stochastic_micro",
    "direction": "maximize",
    "domain": {"lower": [0.0], "upper": [1.0]},
    "levels": [
        {
            "name": "continuum",
            "queue": "cpu",
            "cost": {"base": 1.0, "walltime": 1.0},
            # biased cheap approximation: 0.8 g(x) + 0.1 - 0.2 x
            "model": {
                "kind": "transform",
                "scale": 0.8,
                "base": {"kind": "sum", "parts": [
                    {"kind": "gaussian_sum", "terms": [
                        {"amplitude": 1.0, "center": [0.3], "width": [0.1]},
                        {"amplitude": -0.6, "center": [0.75], "width": [0.12]}]},
                    {"kind": "polynomial", "terms": [{"coef": 0.2, "powers": [1]}]}]},
                "add": {"kind": "polynomial", "constant": 0.1, "terms": [{"coef": -0.2, "powers": [1]}]},
            },
        },
        {
            "name": "particle",
            "queue": "gpu",
            "cost": {"base": 5.0, "walltime": 5.0},
            "trust": {"coeffs": [0.0005, 0.001, 0.0], "feature": "unit:0"},
            "model": {"kind": "sum", "parts": [
                {"kind": "gaussian_sum", "terms": [
                    {"amplitude": 1.0, "center": [0.3], "width": [0.1]},
                    {"amplitude": -0.6, "center": [0.75], "width": [0.12]}]},
                {"kind": "polynomial", "terms": [{"coef": 0.2, "powers": [1]}]}]},
            # heteroskedastic noise variance, smallest at x = 0
            "noise": {"kind": "polynomial", "constant": 0.002, "terms": [{"coef": 0.02, "powers": [2]}]},
        },
    ],
}

# location of the smallest noise variance of stochastic_micro's particle level
STOCHASTIC_NOISE_MIN = (DesignPoint((0.0,)), 0.002)


def forrester_pair() -> BenchmarkProblem:
    return problem_from_dict(FORRESTER_SPEC)


def eh_analogue() -> BenchmarkProblem:
    return problem_from_dict(EH_SPEC)


def stochastic_micro() -> BenchmarkProblem:
    return problem_from_dict(STOCHASTIC_SPEC)


BENCHMARKS = {
    "forrester_pair": forrester_pair,
    "eh_analogue": eh_analogue,
    "stochastic_micro": stochastic_micro,
}

DESCRIPTIONS = {
    "forrester_pair": "1D Forrester function with its classic cheap biased companion (2 levels, minimize)",
    "eh_analogue": "2D smooth reactor-design stand-in with one interior maximum (1 level, maximize)",
    "stochastic_micro": "1D smooth surface with a noisy particle level and a biased continuum level (2 levels)",
}


def get_benchmark(name: str) -> BenchmarkProblem:
    try:
        return BENCHMARKS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown benchmark {name!r}; available: {sorted(BENCHMARKS)}") from None


def grid_optimum(problem: BenchmarkProblem, n_per_dim: int, level: Optional[int] = None):
    """Best grid point of a level (top by default), in the problem's direction."""
    level = problem.L - 1 if level is None else level
    axes = [np.linspace(lo, hi, n_per_dim) for lo, hi in zip(problem.domain.lower, problem.domain.upper)]
    X = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = problem.value(X, level) * problem.sign
    k = int(np.argmax(vals))
    return DesignPoint(tuple(X[k])), float(vals[k] * problem.sign)


__all__ = [
    "BENCHMARKS",
    "BenchmarkProblem",
    "DESCRIPTIONS",
    "LevelModel",
    "build_model",
    "eh_analogue",
    "forrester_pair",
    "get_benchmark",
    "grid_optimum",
    "noise_stream",
    "problem_from_dict",
    "stochastic_micro",
]
