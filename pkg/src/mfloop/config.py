"""TOML campaign and problem files: parsing, validation diagnostics, conversion."""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import allocator as alloc
from .bench import BENCHMARKS, problem_from_dict
from .driver import CLOCKS, GOALS, CampaignConfig
from .errors import MfloopError

SCHEMA_VERSION = 1

_SECTIONS = {
    "problem": {"benchmark", "file", "levels"},
    "campaign": {"goal", "n_init", "n_anchors", "iterations", "seed", "heuristic", "grid_points"},
    "budget": {"T", "B"},
    "surrogate": {"bridge_degree", "noise_floor"},
    "acquisition": {"max_candidates", "starts", "evals", "exact_limit"},
    "orchestrator": {"clock", "time_scale", "collect_timeout", "restart_delay", "latency", "workers"},
}
_TOP = {"schema_version", "name"} | set(_SECTIONS)
_WORKER_KEYS = {"id", "queues", "speed", "failure_rate"}


@dataclass(frozen=True)
class Diagnostic:
    key: str
    message: str
    line: Optional[int] = None
    column: Optional[int] = None

    def __str__(self) -> str:
        where = f" (line {self.line}, column {self.column})" if self.line is not None else ""
        return f"{self.key}: {self.message}{where}"


def _parse(path: Path, diags: list) -> Optional[dict]:
    try:
        text = path.read_text()
    except OSError as exc:
        diags.append(Diagnostic(str(path), f"cannot read file: {exc.strerror or exc}"))
        return None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"line (\d+), column (\d+)", msg)
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        diags.append(Diagnostic(str(path), f"parse error: {re.sub(r' [(]at .*[)]$', '', msg)}", line, col))
        return None


class _Checker:
    def __init__(self, diags: list):
        self.diags = diags

    def add(self, key, message):
        self.diags.append(Diagnostic(key, message))

    def number(self, table, name, key, *, positive=False, nonneg=False, integer=False, minimum=None):
        if name not in table:
            return None
        v = table[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
            self.add(key, f"must be {'an integer' if integer else 'a number'}, got {v!r}")
            return None
        if positive and not v > 0:
            self.add(key, f"must be positive, got {v}")
        elif nonneg and not v >= 0:
            self.add(key, f"must be non-negative, got {v}")
        elif minimum is not None and v < minimum:
            self.add(key, f"must be at least {minimum}, got {v}")
        return v

    def choice(self, table, name, key, options):
        if name in table and table[name] not in options:
            self.add(key, f"must be one of {list(options)}, got {table[name]!r}")

    def unknown(self, table, allowed, prefix):
        for k in table:
            if k not in allowed:
                self.add(f"{prefix}{k}", "unknown key")


def validate_problem_spec(spec: dict, prefix: str = "problem") -> list:
    """Structural checks for a declarative problem description."""
    diags: list = []
    c = _Checker(diags)
    dom = spec.get("domain")
    if not isinstance(dom, dict) or "lower" not in dom or "upper" not in dom:
        c.add(f"{prefix}.domain", "needs 'lower' and 'upper' arrays")
    levels = spec.get("levels")
    if not isinstance(levels, list) or not levels:
        c.add(f"{prefix}.levels", "needs at least one [[levels]] table")
        return diags
    prev = None
    for k, lev in enumerate(levels):
        key = f"{prefix}.levels[{k}]"
        if not isinstance(lev, dict):
            c.add(key, "must be a table")
            continue
        if "model" not in lev:
            c.add(f"{key}.model", "missing")
        cost = lev.get("cost")
        if not isinstance(cost, dict):
            c.add(f"{key}.cost", "missing cost table with 'base' and 'walltime'")
        else:
            base = c.number(cost, "base", f"{key}.cost.base", positive=True)
            c.number(cost, "walltime", f"{key}.cost.walltime", positive=True)
            if base is None and "base" not in cost:
                c.add(f"{key}.cost.base", "missing")
            if base is not None and prev is not None and base < prev:
                c.add(f"{key}.cost.base", f"levels must be ordered cheapest first ({base} < {prev} of the level below)")
            prev = base if base is not None else prev
        trust = lev.get("trust", {})
        coeffs = trust.get("coeffs", []) if isinstance(trust, dict) else []
        if any(not isinstance(v, (int, float)) or v < 0 for v in coeffs):
            c.add(f"{key}.trust.coeffs", f"coefficients must be non-negative numbers, got {coeffs}")
    if "bridges" in spec:
        nb = len(spec["bridges"]) if isinstance(spec["bridges"], list) else -1
        if nb != len(levels) - 1:
            c.add(f"{prefix}.bridges", f"a {len(levels)}-level hierarchy needs {len(levels) - 1} bridges, found {nb}")
    if spec.get("direction", "maximize") not in ("maximize", "minimize"):
        c.add(f"{prefix}.direction", "must be 'maximize' or 'minimize'")
    if not diags:
        try:
            problem_from_dict(spec)
        except MfloopError as exc:
            c.add(prefix, str(exc))
    return diags


def load_problem_file(path) -> tuple:
    """``(spec dict or None, diagnostics)`` for a standalone problem file."""
    path = Path(path)
    diags: list = []
    spec = _parse(path, diags)
    if spec is None:
        return None, diags
    diags += validate_problem_spec(spec)
    return (spec if not diags else None), diags


def validate_dict(doc: dict, base_dir: Path = Path(".")) -> tuple:
    """``(CampaignConfig or None, diagnostics)`` for a parsed campaign document."""
    diags: list = []
    c = _Checker(diags)
    if "schema_version" not in doc:
        c.add("schema_version", "missing")
    elif doc["schema_version"] != SCHEMA_VERSION:
        c.add("schema_version", f"unsupported version {doc['schema_version']!r}; expected {SCHEMA_VERSION}")
    c.unknown(doc, _TOP, "")
    sec = {}
    for name, keys in _SECTIONS.items():
        t = doc.get(name, {})
        if not isinstance(t, dict):
            c.add(name, "must be a table")
            t = {}
        c.unknown(t, keys, f"{name}.")
        sec[name] = t

    prob, camp, bud, sur, acq_, orch = (sec[k] for k in _SECTIONS)
    spec = None
    n_levels = None
    if ("benchmark" in prob) == ("file" in prob):
        c.add("problem", "set exactly one of 'benchmark' or 'file'")
    elif "benchmark" in prob:
        if prob["benchmark"] not in BENCHMARKS:
            c.add("problem.benchmark", f"unknown benchmark {prob['benchmark']!r}; available: {sorted(BENCHMARKS)}")
        else:
            n_levels = BENCHMARKS[prob["benchmark"]]().L
    else:
        spec, pd = load_problem_file(base_dir / prob["file"])
        diags += [Diagnostic(f"problem.file: {d.key}", d.message, d.line, d.column) for d in pd]
        if spec is not None:
            n_levels = len(spec["levels"])
    levels = prob.get("levels")
    if levels is not None:
        if (not isinstance(levels, list) or not levels or any(not isinstance(k, int) for k in levels)
                or sorted(set(levels)) != levels):
            c.add("problem.levels", "must be a non-empty increasing list of level indices")
        elif n_levels is not None and (levels[0] < 0 or levels[-1] >= n_levels):
            c.add("problem.levels", f"indices must lie in 0..{n_levels - 1}")
        else:
            n_levels = len(levels)

    c.choice(camp, "goal", "campaign.goal", GOALS)
    c.choice(camp, "heuristic", "campaign.heuristic", alloc.HEURISTICS)
    c.number(camp, "n_init", "campaign.n_init", integer=True, minimum=1)
    c.number(camp, "n_anchors", "campaign.n_anchors", integer=True, minimum=0)
    c.number(camp, "iterations", "campaign.iterations", integer=True, minimum=1)
    c.number(camp, "seed", "campaign.seed", integer=True, minimum=0)
    c.number(camp, "grid_points", "campaign.grid_points", integer=True, minimum=2)
    for k in ("T", "B"):
        if k not in bud:
            c.add(f"budget.{k}", "missing")
        c.number(bud, k, f"budget.{k}", positive=True)
    c.number(sur, "noise_floor", "surrogate.noise_floor", nonneg=True)
    deg = sur.get("bridge_degree", "auto")
    if deg != "auto" and (isinstance(deg, bool) or deg not in (0, 1, 2)):
        c.add("surrogate.bridge_degree", f"must be 'auto', 0, 1 or 2, got {deg!r}")
    mc = acq_.get("max_candidates")
    if isinstance(mc, list):
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in mc):
            c.add("acquisition.max_candidates", "entries must be non-negative integers")
        elif n_levels is not None and len(mc) != n_levels:
            c.add("acquisition.max_candidates", f"lists {len(mc)} levels, the hierarchy has {n_levels}")
    else:
        c.number(acq_, "max_candidates", "acquisition.max_candidates", integer=True, minimum=1)
    c.number(acq_, "starts", "acquisition.starts", integer=True, minimum=1)
    c.number(acq_, "evals", "acquisition.evals", integer=True, minimum=1)
    c.number(acq_, "exact_limit", "acquisition.exact_limit", integer=True, minimum=0)
    c.choice(orch, "clock", "orchestrator.clock", CLOCKS)
    c.number(orch, "time_scale", "orchestrator.time_scale", positive=True)
    c.number(orch, "collect_timeout", "orchestrator.collect_timeout", positive=True)
    c.number(orch, "restart_delay", "orchestrator.restart_delay", nonneg=True)
    lat = orch.get("latency", {})
    if not isinstance(lat, dict):
        c.add("orchestrator.latency", "must be a table of queue = seconds")
        lat = {}
    for q in lat:
        c.number(lat, q, f"orchestrator.latency.{q}", nonneg=True)
    workers = orch.get("workers", [])
    if not isinstance(workers, list):
        c.add("orchestrator.workers", "must be an array of tables")
        workers = []
    for k, w in enumerate(workers):
        key = f"orchestrator.workers[{k}]"
        if not isinstance(w, dict):
            c.add(key, "must be a table")
            continue
        c.unknown(w, _WORKER_KEYS, f"{key}.")
        if not isinstance(w.get("id"), str):
            c.add(f"{key}.id", "missing or not a string")
        if not isinstance(w.get("queues"), list) or not w.get("queues"):
            c.add(f"{key}.queues", "must be a non-empty list of queue names")
        c.number(w, "speed", f"{key}.speed", positive=True)
        fr = c.number(w, "failure_rate", f"{key}.failure_rate", nonneg=True)
        if fr is not None and fr >= 1:
            c.add(f"{key}.failure_rate", f"must be below 1, got {fr}")
    if diags:
        return None, diags

    kwargs = dict(
        name=doc.get("name", "campaign"),
        problem=prob.get("benchmark", spec["name"] if spec and "name" in spec else "custom"),
        problem_spec=spec,
        levels=tuple(levels) if levels is not None else None,
        goal=camp.get("goal", "optimize"),
        n_init=camp.get("n_init", 4),
        n_anchors=camp.get("n_anchors", 2),
        I=camp.get("iterations", 5),
        seed=camp.get("seed", 0),
        heuristic=camp.get("heuristic", "proportional_steps"),
        grid_points=camp.get("grid_points", 100),
        T=float(bud["T"]),
        B=float(bud["B"]),
        bridge_degree=deg,
        noise_floor=float(sur.get("noise_floor", 0.0)),
        max_candidates=tuple(mc) if isinstance(mc, list) else acq_.get("max_candidates", 4),
        acq_starts=acq_.get("starts", 32),
        acq_evals=acq_.get("evals", 200),
        exact_limit=acq_.get("exact_limit", alloc.EXACT_LIMIT),
        clock=orch.get("clock", "virtual"),
        time_scale=float(orch.get("time_scale", 1e-3)),
        collect_timeout=orch.get("collect_timeout"),
        restart_delay=float(orch.get("restart_delay", 0.0)),
        latency={k: float(v) for k, v in lat.items()},
        workers=tuple({"id": w["id"], "serviced_queues": w["queues"], "speed_factor": w.get("speed", 1.0),
                       "failure_rate": w.get("failure_rate", 0.0)} for w in workers),
    )
    try:
        cfg = CampaignConfig(**kwargs)
        from .driver import build_problem, resolve_workers

        resolve_workers(cfg, build_problem(cfg))
    except MfloopError as exc:
        key = "orchestrator.workers" if "queue" in str(exc) else "campaign"
        return None, [Diagnostic(key, str(exc))]
    return cfg, []


def validate_file(path) -> tuple:
    """``(CampaignConfig or None, diagnostics)`` for a campaign or problem TOML file."""
    path = Path(path)
    diags: list = []
    doc = _parse(path, diags)
    if doc is None:
        return None, diags
    if "schema_version" not in doc and "domain" in doc:
        # a standalone problem description
        return None, validate_problem_spec(doc)
    return validate_dict(doc, path.parent)


def load_config(path) -> CampaignConfig:
    from .errors import ConfigurationError

    cfg, diags = validate_file(path)
    if diags:
        raise ConfigurationError("; ".join(str(d) for d in diags))
    return cfg


def shipped_configs() -> dict:
    """Example campaign files shipped with the package, by stem."""
    root = Path(__file__).parent / "configs"
    return {p.stem: p for p in sorted(root.glob("*.toml"))}


__all__ = [
    "Diagnostic",
    "SCHEMA_VERSION",
    "load_config",
    "load_problem_file",
    "shipped_configs",
    "validate_dict",
    "validate_file",
    "validate_problem_spec",
]
