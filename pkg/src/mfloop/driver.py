"""Campaign outer loop: initial design, then plan, fit, propose, select, dispatch, collect.

A campaign with an output directory keeps a queue journal, a result store
and one checkpoint per finished iteration there; :func:`resume_campaign`
picks up from any checkpoint and produces the same report as an
uninterrupted run (virtual clock).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import acquisition as acq
from . import allocator as alloc
from .bench import BenchmarkProblem, get_benchmark, problem_from_dict
from .domain import DesignPoint, Observation, lhs_design
from .errors import ConfigurationError, IntegrityError, MfloopError, MissingData, NoCandidates
from .mf import LevelData, MfSurrogate, fit_mf, recondition
from .orchestrator import (
    Broker,
    ResultStore,
    Task,
    WorkerProfile,
    canonical_json,
    run_simulated,
    run_threaded,
    worker_counts,
)

CHECKPOINT_FORMAT = "mfloop-checkpoint"
REPORT_FORMAT = "mfloop-report"
FORMAT_VERSION = 1
GOALS = acq.MODES
CLOCKS = ("virtual", "real")
JOURNAL_FILE = "journal.jsonl"
STORE_FILE = "results.jsonl"
CHECKPOINT_DIR = "checkpoints"


@dataclass(frozen=True)
class CampaignConfig:
    problem: str = "forrester_pair"
    goal: str = "optimize"
    n_init: int = 4
    I: int = 5
    T: float = 1000.0
    B: float = 60.0
    heuristic: str = "proportional_steps"
    seed: int = 0
    workers: tuple = ()
    n_anchors: int = 2
    levels: Optional[tuple] = None
    problem_spec: Optional[dict] = None
    max_candidates: Union[int, tuple] = 4
    bridge_degree: Union[str, int] = "auto"
    noise_floor: float = 0.0
    clock: str = "virtual"
    time_scale: float = 1e-3
    collect_timeout: Optional[float] = None
    latency: dict = field(default_factory=dict)
    restart_delay: float = 0.0
    acq_starts: int = acq.N_STARTS
    acq_evals: int = acq.EVALS_PER_START
    exact_limit: int = alloc.EXACT_LIMIT
    grid_points: int = 100
    name: str = "campaign"

    def __post_init__(self):
        object.__setattr__(self, "workers", tuple(
            w if isinstance(w, WorkerProfile) else WorkerProfile.from_dict(w) for w in self.workers))
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(int(k) for k in self.levels))
        if self.goal not in GOALS:
            raise ConfigurationError(f"goal must be one of {GOALS}, got {self.goal!r}")
        if self.heuristic not in alloc.HEURISTICS:
            raise ConfigurationError(f"heuristic must be one of {alloc.HEURISTICS}, got {self.heuristic!r}")
        if self.clock not in CLOCKS:
            raise ConfigurationError(f"clock must be one of {CLOCKS}, got {self.clock!r}")
        if self.n_init < 1 or self.I < 1:
            raise ConfigurationError("n_init and I must be at least 1")
        if not (self.T > 0 and self.B > 0):
            raise ConfigurationError("budgets T and B must be positive")
        if isinstance(self.max_candidates, (list, tuple)):
            object.__setattr__(self, "max_candidates", tuple(int(k) for k in self.max_candidates))
        caps = self.max_candidates if isinstance(self.max_candidates, tuple) else (self.max_candidates,)
        if self.n_anchors < 0 or min(caps) < 0:
            raise ConfigurationError("n_anchors and max_candidates must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["workers"] = [w.to_dict() for w in self.workers]
        d["levels"] = None if self.levels is None else list(self.levels)
        if isinstance(self.max_candidates, tuple):
            d["max_candidates"] = list(self.max_candidates)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        return cls(**d)


def build_problem(config: CampaignConfig) -> BenchmarkProblem:
    problem = problem_from_dict(config.problem_spec) if config.problem_spec else get_benchmark(config.problem)
    if config.levels is not None:
        problem = problem.restrict(config.levels)
    return problem


def resolve_workers(config: CampaignConfig, problem: BenchmarkProblem) -> list:
    """Configured workers, or one worker per level queue; every queue must be served."""
    queues = list(dict.fromkeys(lev.queue_name for lev in problem.levels))
    workers = list(config.workers) or [WorkerProfile(f"{q}-0", (q,)) for q in queues]
    served = worker_counts(workers)
    missing = [q for q in queues if served.get(q, 0) == 0]
    if missing:
        raise ConfigurationError(f"no worker services queue(s) {missing}")
    return workers


def derive_seed(seed: int, *tags) -> int:
    return int(np.random.SeedSequence([int(seed) % 2**63, *tags]).generate_state(1)[0])


def eval_grid(dim: int, n_points: int) -> np.ndarray:
    """Fixed regular grid of about ``n_points`` points in the unit box."""
    per = max(2, int(round(n_points ** (1.0 / dim))))
    axes = [np.linspace(0.0, 1.0, per)] * dim
    return np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)


# ---------------------------------------------------------------- state


@dataclass
class CampaignState:
    budget: alloc.BudgetState
    history: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    ledger: list = field(default_factory=list)
    clock: float = 0.0
    next_i: int = 0
    status: str = "running"
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"budget": self.budget.to_dict(), "history": self.history, "iterations": self.iterations,
                "ledger": self.ledger, "clock": self.clock, "next_i": self.next_i, "status": self.status,
                "diagnostics": self.diagnostics}

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignState":
        return cls(alloc.BudgetState.from_dict(d["budget"]), d["history"], d["iterations"], d["ledger"],
                   d["clock"], d["next_i"], d["status"], d["diagnostics"])


def _observations(state: CampaignState) -> list:
    return [Observation.from_dict(h["observation"]) for h in state.history]


def level_data(problem: BenchmarkProblem, history: list, upto_iteration: Optional[int] = None) -> list:
    """Feasible training data per level in normalized coordinates and maximization sign."""
    rows = [[] for _ in range(problem.L)]
    for h in history:
        if upto_iteration is not None and h["iteration"] > upto_iteration:
            continue
        o = h["observation"]
        if o["feasible"]:
            rows[o["level"]].append(o)
    out = []
    for r in rows:
        if not r:
            out.append(LevelData(np.empty((0, problem.domain.dim)), np.empty(0)))
            continue
        U = problem.domain.to_unit(np.array([o["point"] for o in r], dtype=float))
        out.append(LevelData(U, problem.sign * np.array([o["value"] for o in r]), np.array([o["noise_var"] for o in r])))
    return out


def best_entry(problem: BenchmarkProblem, history: list, level: int) -> Optional[dict]:
    """Best feasible observation at ``level`` (first one on ties)."""
    best = None
    for h in history:
        o = h["observation"]
        if o["level"] == level and o["feasible"]:
            if best is None or problem.sign * o["value"] > problem.sign * best["observation"]["value"]:
                best = h
    return best


# ---------------------------------------------------------------- collection


@dataclass(frozen=True)
class BatchResult:
    observations: list
    records: list
    unresolved: list


def collect_batch(store: ResultStore, task_ids, timeout: Optional[float] = 0.0, *, clock=time.monotonic,
                  sleep=time.sleep, poll_interval: float = 1e-3) -> BatchResult:
    """Gather results for ``task_ids`` from the store until all resolve or ``timeout`` passes.

    Failed tasks come back as infeasible observations. Observations are in
    ``task_ids`` order; ids still missing at the deadline are listed in
    ``unresolved``.
    """
    task_ids = list(task_ids)
    deadline = None if timeout is None else clock() + timeout
    while True:
        missing = [t for t in task_ids if t not in store]
        if not missing or (deadline is not None and clock() >= deadline):
            break
        sleep(poll_interval)
    records = [store.get(t) for t in task_ids if t in store]
    return BatchResult([r.observation for r in records], records, [t for t in task_ids if t not in store])


# ---------------------------------------------------------------- campaign


class Campaign:
    """Mutable runner around :class:`CampaignState`; use :func:`run_campaign`."""

    def __init__(self, config: CampaignConfig, out_dir=None, state: Optional[CampaignState] = None):
        self.config = config
        self.problem = build_problem(config)
        self.workers = resolve_workers(config, self.problem)
        self.out_dir = None if out_dir is None else Path(out_dir)
        self.state = state or CampaignState(alloc.BudgetState(config.T, config.B, config.I))
        self._template: Optional[MfSurrogate] = None
        self._open_backend(fresh=state is None)

    # -- plumbing

    def _open_backend(self, fresh: bool):
        queues = list(dict.fromkeys([lev.queue_name for lev in self.problem.levels]
                                    + [q for w in self.workers for q in w.serviced_queues]))
        kw = {"time_scale": self.config.time_scale if self.config.clock == "real" else 1.0}
        if self.out_dir is None:
            self.store = ResultStore()
            self.broker = Broker(queues, None, self.store, **kw)
            return
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / CHECKPOINT_DIR).mkdir(exist_ok=True)
        journal, results = self.out_dir / JOURNAL_FILE, self.out_dir / STORE_FILE
        if fresh:
            for p in (journal, results):
                if p.exists():
                    p.unlink()
            for p in (self.out_dir / CHECKPOINT_DIR).glob("ckpt_*.json"):
                p.unlink()
            self.store = ResultStore(results)
            self.broker = Broker(queues, journal, self.store, **kw)
        else:
            self.store = ResultStore(results)
            self.broker = Broker.replay(journal, self.store, attach=True, **kw)

    def close(self):
        self.broker.close()
        self.store.close()

    def _evaluate(self, task: Task) -> Observation:
        value, nv, feasible = self.problem.evaluate(task.point, task.level, seed=self.config.seed, task_id=task.id)
        return Observation(task.point, task.level, value, nv, feasible, task.id)

    def _execute(self, tasks: list) -> tuple:
        """Run tasks to completion; returns (BatchResult, makespan)."""
        cfg = self.config
        if not tasks:
            return BatchResult([], [], []), 0.0
        if cfg.clock == "virtual":
            trace = run_simulated(self.workers, tasks, broker=self.broker, evaluate=self._evaluate, seed=cfg.seed,
                                  start_time=self.state.clock, latency=cfg.latency, restart_delay=cfg.restart_delay)
            self.state.clock = trace.end_time
            res = collect_batch(self.store, [t.id for t in tasks], 0.0)
        else:
            trace = run_threaded(self.workers, tasks, broker=self.broker, evaluate=self._evaluate, seed=cfg.seed,
                                 time_scale=cfg.time_scale, timeout=cfg.collect_timeout)
            self.state.clock += trace.makespan
            res = collect_batch(self.store, [t.id for t in tasks], 0.0)
        return res, trace.makespan

    def _record(self, iteration: int, res: BatchResult, tasks: list):
        by_id = {t.id: t for t in tasks}
        for rec in res.records:
            self.state.history.append({"iteration": iteration, "task_id": rec.task_id, "attempt": rec.attempt,
                                       "worker_id": rec.worker_id, "observation": rec.observation.to_dict(),
                                       "planned_cost": by_id[rec.task_id].payload["cost"]})
        if res.unresolved:
            self.state.diagnostics.append(f"iteration {iteration}: tasks {res.unresolved} unresolved at timeout")

    def _make_tasks(self, iteration: int, items: list) -> list:
        """``items`` are ``(level, m, u)``; tasks are ordered longest first for LPT dispatch."""
        tasks = []
        for level, m, u in items:
            lev = self.problem.levels[level]
            point = DesignPoint(tuple(float(c) for c in self.problem.domain.from_unit(np.asarray(u))))
            payload = {"walltime": lev.cost_model.time(u), "cost": lev.cost_model.cost(u), "iteration": iteration}
            tasks.append(Task(f"{iteration:04d}-{level}-{m}", lev.queue_name, point, level, payload))
        tasks.sort(key=lambda t: (-t.payload["walltime"], t.level, t.id))
        return tasks

    def _planned_makespan(self, tasks) -> float:
        cands = [acq.make_candidate(0, t.level, t.point, (), 1.0, t.payload["cost"], t.payload["walltime"])
                 for t in tasks]
        return alloc.queue_makespan(cands, worker_counts(self.workers), lambda l: self.problem.levels[l].queue_name)

    def _ledger(self, i, kind, T_i, B_i, spent_T, spent_B, before: alloc.BudgetState, after: alloc.BudgetState):
        self.state.ledger.append({
            "i": i, "kind": kind, "T_remaining_before": before.T_remaining, "B_remaining_before": before.B_remaining,
            "T_i": T_i, "B_i": B_i, "T_remaining_after": after.T_remaining, "B_remaining_after": after.B_remaining,
            "spent_T": spent_T, "spent_B": spent_B, "terminated": after.terminated,
        })

    # -- checkpoints

    def checkpoint(self):
        if self.out_dir is None:
            return
        k = self.state.next_i
        body = {"config": self.config.to_dict(), "state": self.state.to_dict(),
                "files": {JOURNAL_FILE: (self.out_dir / JOURNAL_FILE).stat().st_size,
                          STORE_FILE: (self.out_dir / STORE_FILE).stat().st_size}}
        doc = {"format": CHECKPOINT_FORMAT, "version": FORMAT_VERSION, "iteration": k,
               "sha256": hashlib.sha256(canonical_json(body).encode()).hexdigest(), "body": body}
        path = self.out_dir / CHECKPOINT_DIR / f"ckpt_{k:04d}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n")
        os.replace(tmp, path)

    # -- phases

    def initialize(self):
        cfg, problem, st = self.config, self.problem, self.state
        levels = problem.levels
        pts = lhs_design(cfg.n_init, problem.domain, derive_seed(cfg.seed, 1))
        U = problem.domain.to_unit(np.array([p.coords for p in pts]))
        lhs_tasks = self._make_tasks(0, [(0, m, U[m]) for m in range(cfg.n_init)])
        lhs_cost = math.fsum(t.payload["cost"] for t in lhs_tasks)
        lhs_T = self._planned_makespan(lhs_tasks)
        if lhs_cost > cfg.B or lhs_T > cfg.T:
            raise ConfigurationError(
                f"budget too small for initialization: {cfg.n_init} initial points need B >= {lhs_cost:g} and "
                f"T >= {lhs_T:g} (have B={cfg.B:g}, T={cfg.T:g})")
        res, span0 = self._execute(lhs_tasks)
        self._record(0, res, lhs_tasks)
        feas = [h for h in st.history if h["observation"]["feasible"]]
        if not feas:
            st.status = "failed"
            st.diagnostics.append(f"all {cfg.n_init} initial evaluations at level 0 were infeasible")
        # anchors on every higher level at the extremes of the level-0 values
        anchor_tasks = []
        if problem.L > 1 and feas and cfg.n_anchors > 0:
            order = sorted(range(len(feas)), key=lambda k: (feas[k]["observation"]["value"], k))
            picks = []
            lo, hi = 0, len(order) - 1
            while lo <= hi and len(picks) < cfg.n_anchors:
                picks.append(order[hi])
                hi -= 1
                if lo <= hi and len(picks) < cfg.n_anchors:
                    picks.append(order[lo])
                    lo += 1
            for k in range(len(picks), 0, -1):
                items = []
                for a, idx in enumerate(picks[:k]):
                    u = problem.domain.to_unit(np.array([feas[idx]["observation"]["point"]]))[0]
                    items += [(lev, a, u) for lev in range(1, problem.L)]
                trial = self._make_tasks(0, items)
                cost = lhs_cost + math.fsum(t.payload["cost"] for t in trial)
                if cost <= cfg.B and lhs_T + self._planned_makespan(trial) <= cfg.T:
                    anchor_tasks = trial
                    break
            if len(anchor_tasks) < len(picks) * (problem.L - 1):
                st.diagnostics.append(f"budget allows {len(anchor_tasks) // (problem.L - 1)} of "
                                      f"{cfg.n_anchors} anchor points")
            res, _ = self._execute(anchor_tasks)
            self._record(0, res, anchor_tasks)
        init_tasks = lhs_tasks + anchor_tasks
        T0 = lhs_T + self._planned_makespan(anchor_tasks)
        B0 = math.fsum(t.payload["cost"] for t in init_tasks)
        before = st.budget
        st.budget = replace(before, T_remaining=before.T_remaining - T0, B_remaining=before.B_remaining - B0,
                            terminated=before.T_remaining - T0 < 0 or before.B_remaining - B0 < 0)
        self._ledger(0, "init", T0, B0, st.clock, B0, before, st.budget)
        st.iterations.append({"i": 0, "kind": "init", "T_i": T0, "B_i": B0, "counts": [], "n_candidates": 0,
                              "selected": [t.id for t in init_tasks], "benefit": 0.0, "planned_cost": B0,
                              "planned_makespan": T0, "spent_T": st.clock, "spent_B": B0, "optimal": True,
                              "mean_variance": None, "best_value": self._best_value()})
        st.next_i = 1
        if st.status == "running" and cfg.goal == "reduce_variance":
            st.iterations[-1]["mean_variance"] = self._mean_variance(self.surrogate())
        self.checkpoint()

    def _caps(self) -> list:
        caps = self.config.max_candidates
        if isinstance(caps, tuple):
            if len(caps) != self.problem.L:
                raise ConfigurationError(f"max_candidates lists {len(caps)} levels, problem has {self.problem.L}")
            return list(caps)
        return [caps] * self.problem.L

    def _best_value(self):
        b = best_entry(self.problem, self.state.history, self.problem.L - 1)
        return None if b is None else b["observation"]["value"]

    def _degrees(self):
        return list(self.problem.bridge_degrees) if self.problem.bridge_degrees else self.config.bridge_degree

    def surrogate(self, seed_tag: int = 0) -> MfSurrogate:
        """Surrogate on the current history (frozen calibration in reduce_variance mode)."""
        cfg, problem = self.config, self.problem
        trust = [lev.trust_prior for lev in problem.levels]
        data = level_data(problem, self.state.history)
        if cfg.goal == "reduce_variance":
            if self._template is None:
                init = level_data(problem, self.state.history, upto_iteration=0)
                self._template = fit_mf(init, domain=problem.domain, trust=trust, degrees=self._degrees(),
                                        noise_floor=cfg.noise_floor, seed=derive_seed(cfg.seed, 2))
            return recondition(self._template, data)
        return fit_mf(data, domain=problem.domain, trust=trust, degrees=self._degrees(),
                      noise_floor=cfg.noise_floor, seed=derive_seed(cfg.seed, 3, seed_tag))

    def _mean_variance(self, s: MfSurrogate) -> float:
        G = eval_grid(self.problem.domain.dim, self.config.grid_points)
        return float(np.mean(s.predict(G, s.L - 1)[1]))

    def iterate(self) -> bool:
        """One pass of the loop body; returns False once the campaign stops."""
        cfg, problem, st = self.config, self.problem, self.state
        i = st.next_i
        if st.status != "running":
            return False
        if st.budget.terminated or i > cfg.I:
            st.status = "completed"
            return False
        levels = problem.levels
        plan = alloc.plan_iteration(st.budget, [lev.cost_model.base_cost for lev in levels],
                                    max(lev.cost_model.max_walltime() for lev in levels), cfg.heuristic,
                                    self._caps())
        if plan.terminated:
            st.status = "completed"
            st.diagnostics.append(f"iteration {i}: allowance cannot be met by the remaining budget; stopping")
            return False
        s = self.surrogate(i)
        best = None
        if cfg.goal == "optimize":
            b = best_entry(problem, st.history, problem.L - 1)
            if b is None:
                raise MissingData("no feasible observation at the top level to improve on")
            best = problem.sign * b["observation"]["value"]
        seed_i = derive_seed(cfg.seed, 4, i)
        cands, skipped = [], []
        for lev in range(problem.L):
            if plan.counts[lev] == 0:
                continue
            counts = [0] * problem.L
            counts[lev] = plan.counts[lev]
            failed = [h["observation"]["point"] for h in st.history
                      if not h["observation"]["feasible"] and h["observation"]["level"] == lev]
            rep = problem.domain.to_unit(np.array(failed)) if failed else ()
            try:
                cands += acq.propose_batch(s, counts, cfg.goal, seed_i, levels, best=best, repulsion=rep,
                                           n_starts=cfg.acq_starts, max_evals=cfg.acq_evals)
            except NoCandidates:
                skipped.append(lev)
        wc = worker_counts(self.workers)
        queue_of = lambda l: levels[l].queue_name
        sel = alloc.select_tasks(cands, plan.T_i, plan.B_i, wc, queue_of, exact_limit=cfg.exact_limit)
        chosen = [c for c in cands if sel.decisions[(c.m, c.level)]]
        tasks = self._make_tasks(i, [(c.level, c.m, np.asarray(c.u)) for c in chosen])
        res, span = self._execute(tasks)
        self._record(i, res, tasks)
        before = st.budget
        st.budget = alloc.update_budgets(before, plan.T_i, plan.B_i)
        spent_B = math.fsum(t.payload["cost"] for t in tasks)
        self._ledger(i, "iteration", plan.T_i, plan.B_i, span, spent_B, before, st.budget)
        rec = {"i": i, "kind": "iteration", "T_i": plan.T_i, "B_i": plan.B_i, "counts": list(plan.counts),
               "n_candidates": len(cands), "selected": [t.id for t in tasks], "benefit": sel.total_benefit,
               "planned_cost": sel.total_cost, "planned_makespan": sel.total_walltime, "spent_T": span,
               "spent_B": spent_B, "optimal": sel.optimal, "mean_variance": None, "best_value": self._best_value(),
               "candidates": [c.to_dict() for c in cands], "skipped_levels": skipped}
        if cfg.goal == "reduce_variance":
            rec["mean_variance"] = self._mean_variance(self.surrogate())
        st.iterations.append(rec)
        st.next_i = i + 1
        if st.budget.terminated or st.next_i > cfg.I:
            st.status = "completed"
        self.checkpoint()
        return st.status == "running"

    def run(self, stop_after: Optional[int] = None) -> "CampaignReport":
        """Run until the campaign stops, or pause after ``stop_after`` more loop iterations."""
        done = 0
        try:
            if self.state.next_i == 0:
                self.initialize()
            while self.state.status == "running":
                if stop_after is not None and done >= stop_after:
                    return build_report(self.config, self.state, self.problem, final=False)
                try:
                    self.iterate()
                except MfloopError as exc:
                    if isinstance(exc, ConfigurationError):
                        raise
                    self.state.status = "failed"
                    self.state.diagnostics.append(f"iteration {self.state.next_i}: {type(exc).__name__}: {exc}")
                    self.checkpoint()
                done += 1
            return build_report(self.config, self.state, self.problem)
        finally:
            self.close()


def run_campaign(config: CampaignConfig, out_dir=None, *, stop_after: Optional[int] = None) -> "CampaignReport":
    """Run a full campaign; with ``out_dir`` the report files are written there too."""
    report = Campaign(config, out_dir).run(stop_after)
    if out_dir is not None and report.final:
        from .report import write_report

        write_report(report, out_dir)
    return report


# ---------------------------------------------------------------- resume


def list_checkpoints(out_dir) -> list:
    return sorted((Path(out_dir) / CHECKPOINT_DIR).glob("ckpt_*.json"))


def load_checkpoint(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IntegrityError(path, f"unreadable checkpoint ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise IntegrityError(path, "not a campaign checkpoint")
    if doc.get("version") != FORMAT_VERSION:
        raise IntegrityError(path, f"unsupported checkpoint version {doc.get('version')!r}")
    body = doc.get("body")
    if hashlib.sha256(canonical_json(body).encode()).hexdigest() != doc.get("sha256"):
        raise IntegrityError(path, "checkpoint digest mismatch")
    return body


def latest_checkpoint(out_dir) -> Path:
    found = list_checkpoints(out_dir)
    if not found:
        raise IntegrityError(Path(out_dir) / CHECKPOINT_DIR, "no checkpoint found")
    return found[-1]


def resume_campaign(out_dir, checkpoint=None, *, stop_after: Optional[int] = None) -> "CampaignReport":
    """Continue a campaign from ``checkpoint`` (default: the latest one in ``out_dir``).

    Journal and result store are cut back to their sizes at that checkpoint,
    discarding anything recorded afterwards.
    """
    out_dir = Path(out_dir)
    path = Path(checkpoint) if checkpoint is not None else latest_checkpoint(out_dir)
    if not path.is_absolute() and not path.exists():
        path = out_dir / CHECKPOINT_DIR / path
    body = load_checkpoint(path)
    for name, size in body["files"].items():
        f = out_dir / name
        if not f.exists() or f.stat().st_size < size:
            raise IntegrityError(f, f"shorter than recorded at checkpoint {path.name}")
        with open(f, "r+b") as fh:
            fh.truncate(size)
    config = CampaignConfig.from_dict(body["config"])
    state = CampaignState.from_dict(body["state"])
    report = Campaign(config, out_dir, state).run(stop_after)
    if report.final:
        from .report import write_report

        write_report(report, out_dir)
    return report


def report_from_dir(out_dir) -> "CampaignReport":
    """Report for the latest checkpoint of a campaign directory."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise IntegrityError(out_dir, "campaign directory not found")
    body = load_checkpoint(latest_checkpoint(out_dir))
    config = CampaignConfig.from_dict(body["config"])
    state = CampaignState.from_dict(body["state"])
    return build_report(config, state, build_problem(config), final=state.status != "running")


# ---------------------------------------------------------------- report


@dataclass
class CampaignReport:
    config: CampaignConfig
    problem: BenchmarkProblem
    state: CampaignState
    best: Optional[dict]
    best_per_level: list
    surrogate: Optional[MfSurrogate]
    regret: Optional[float]
    final: bool = True

    @property
    def status(self) -> str:
        return self.state.status

    @property
    def observations(self) -> list:
        return _observations(self.state)

    @property
    def ledger(self) -> list:
        return self.state.ledger

    @property
    def iterations(self) -> list:
        return self.state.iterations

    def to_dict(self) -> dict:
        p = self.problem
        opt = None
        if p.true_optimum is not None:
            opt = {"point": list(p.true_optimum[0].coords), "value": p.true_optimum[1]}
        return {
            "format": REPORT_FORMAT,
            "version": FORMAT_VERSION,
            "name": self.config.name,
            "status": self.state.status,
            "diagnostics": list(self.state.diagnostics),
            "config": self.config.to_dict(),
            "problem": {"name": p.name, "direction": p.direction, "levels": [lev.name for lev in p.levels],
                        "dim": p.domain.dim, "true_optimum": opt},
            "best": self.best,
            "best_per_level": self.best_per_level,
            "simple_regret": self.regret,
            "observations": self.state.history,
            "iterations": self.state.iterations,
            "ledger": self.state.ledger,
            "budget": self.state.budget.to_dict(),
            "virtual_time": self.state.clock,
            "surrogate": None if self.surrogate is None else self.surrogate.summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _final_surrogate(config, state, problem) -> Optional[MfSurrogate]:
    c = Campaign.__new__(Campaign)
    c.config, c.problem, c.state, c._template = config, problem, state, None
    try:
        return c.surrogate(seed_tag=10**6)
    except MfloopError:
        return None


def build_report(config: CampaignConfig, state: CampaignState, problem: BenchmarkProblem,
                 final: bool = True) -> CampaignReport:
    top = problem.L - 1
    per_level = []
    for lev in range(problem.L):
        b = best_entry(problem, state.history, lev)
        per_level.append(None if b is None else {"level": lev, "task_id": b["task_id"],
                                                 "point": b["observation"]["point"],
                                                 "value": b["observation"]["value"]})
    s = _final_surrogate(config, state, problem) if final and state.history else None
    best = per_level[top]
    if best is not None:
        best = dict(best)
        if s is not None:
            u = problem.domain.to_unit(np.array([best["point"]]))
            m, epi = s.epistemic(u, top)
            tv = s.trust_var(u, top)
            best["uncertainty"] = {"mean": float(problem.sign * m[0]), "epistemic_var": float(epi[0]),
                                   "trust_var": float(tv[0]), "std": float(np.sqrt(epi[0] + tv[0]))}
    regret = None
    if best is not None and problem.true_optimum is not None:
        regret = max(0.0, problem.sign * (problem.true_optimum[1] - best["value"]))
    return CampaignReport(config, problem, state, best, per_level, s, regret, final)


# ---------------------------------------------------------------- ledger audit


def replay_ledger(ledger: list, T: float, B: float, I: int) -> list:
    """Independent re-derivation of the budget ledger; returns a list of violations."""
    problems = []
    T_r, B_r = T, B
    stopped = False
    for k, row in enumerate(ledger):
        if stopped:
            problems.append(f"row {k}: entry after a terminating row")
        if row["i"] != k:
            problems.append(f"row {k}: iteration index {row['i']}")
        if k > I:
            problems.append(f"row {k}: exceeds the iteration cap {I}")
        if row["T_remaining_before"] != T_r or row["B_remaining_before"] != B_r:
            problems.append(f"row {k}: opening balance does not carry over")
        T_r, B_r = T_r - row["T_i"], B_r - row["B_i"]
        if row["T_remaining_after"] != T_r or row["B_remaining_after"] != B_r:
            problems.append(f"row {k}: closing balance is not opening minus allowance")
        if row["terminated"] != (T_r < 0 or B_r < 0):
            problems.append(f"row {k}: break flag does not match the sign of the remainders")
        if row["kind"] == "iteration" and (row["spent_B"] > row["B_i"] * (1 + 1e-12) or row["T_i"] < 0):
            problems.append(f"row {k}: selected cost exceeds the iteration allowance")
        stopped = stopped or row["terminated"]
    return problems


__all__ = [
    "BatchResult",
    "Campaign",
    "CampaignConfig",
    "CampaignReport",
    "CampaignState",
    "build_problem",
    "build_report",
    "collect_batch",
    "derive_seed",
    "eval_grid",
    "latest_checkpoint",
    "list_checkpoints",
    "load_checkpoint",
    "replay_ledger",
    "report_from_dir",
    "resume_campaign",
    "run_campaign",
]
