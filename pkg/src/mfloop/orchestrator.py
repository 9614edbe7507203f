"""In-process task queues, workers and a centralized result store.

A single :class:`Broker` owns every queue. All state changes go through its
lock and are appended to a JSON-lines journal before the call returns, so
the broker can be rebuilt from the journal after an abrupt stop. Workers
either run inside a discrete-event simulation on a virtual clock
(:func:`run_simulated`) or as real threads (:func:`run_threaded`).
"""

from __future__ import annotations

import bisect
import hashlib
import heapq
import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .domain import DesignPoint, Observation
from .errors import ConfigurationError, IntegrityError, InvalidArgument, StateViolation

JOURNAL_FORMAT = "mfloop-queue-journal"
STORE_FORMAT = "mfloop-result-store"
FORMAT_VERSION = 1
VISIBILITY_FACTOR = 3.0
MAX_ATTEMPTS = 5
STATES = ("queued", "claimed", "done", "failed")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


@dataclass
class Task:
    id: str
    queue_name: str
    point: DesignPoint
    level: int
    payload: dict = field(default_factory=dict)
    state: str = "queued"
    enqueue_time: Optional[float] = None
    claim_time: Optional[float] = None
    done_time: Optional[float] = None
    attempt: int = 0
    worker_id: Optional[str] = None
    seq: int = -1

    @property
    def walltime(self) -> float:
        return float(self.payload.get("walltime", 1.0))

    def descriptor(self) -> dict:
        return {"id": self.id, "queue": self.queue_name, "point": list(self.point.coords), "level": self.level,
                "payload": self.payload}

    def to_dict(self) -> dict:
        d = self.descriptor()
        d.update(state=self.state, enqueue_time=self.enqueue_time, claim_time=self.claim_time,
                 done_time=self.done_time, attempt=self.attempt, worker_id=self.worker_id, seq=self.seq)
        return d


@dataclass(frozen=True)
class WorkerProfile:
    id: str
    serviced_queues: tuple
    speed_factor: float = 1.0
    failure_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "serviced_queues", tuple(self.serviced_queues))
        if not self.serviced_queues:
            raise InvalidArgument(f"worker {self.id!r} must service at least one queue")
        if not self.speed_factor > 0:
            raise InvalidArgument(f"worker {self.id!r} speed_factor must be positive")
        if not 0 <= self.failure_rate < 1:
            raise InvalidArgument(f"worker {self.id!r} failure_rate must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {"id": self.id, "serviced_queues": list(self.serviced_queues), "speed_factor": self.speed_factor,
                "failure_rate": self.failure_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "WorkerProfile":
        return cls(d["id"], tuple(d["serviced_queues"]), float(d.get("speed_factor", 1.0)),
                   float(d.get("failure_rate", 0.0)))


@dataclass(frozen=True)
class ResultRecord:
    task_id: str
    observation: Observation
    worker_id: str
    attempt: int

    def __post_init__(self):
        if self.attempt < 1:
            raise InvalidArgument("attempt numbers start at 1")

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "observation": self.observation.to_dict(), "worker_id": self.worker_id,
                "attempt": self.attempt}

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        return cls(d["task_id"], Observation.from_dict(d["observation"]), d["worker_id"], int(d["attempt"]))


@dataclass(frozen=True)
class Ack:
    task_id: str
    duplicate: bool


# ---------------------------------------------------------------- JSONL files


def _read_jsonl(path: Path, fmt: str) -> list:
    """Parse a versioned JSON-lines file; a torn final line (no newline) is dropped."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise IntegrityError(path, f"cannot read: {exc}") from exc
    lines = text.split("\n")
    lines.pop()  # empty, or a line cut short before its newline
    rows = []
    for k, line in enumerate(lines):
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise IntegrityError(path, f"line {k + 1} is not valid JSON ({exc.msg})") from None
    if not rows:
        raise IntegrityError(path, "missing header line")
    header = rows[0]
    if not isinstance(header, dict) or header.get("format") != fmt:
        raise IntegrityError(path, f"header does not declare format {fmt!r}")
    if header.get("version") != FORMAT_VERSION:
        raise IntegrityError(path, f"unsupported version {header.get('version')!r}")
    return rows


class _JsonlWriter:
    def __init__(self, path, header: dict, fsync: bool):
        self.path = Path(path)
        self.fsync = fsync
        if self.path.exists():
            # drop a torn final line left by an abrupt stop
            data = self.path.read_bytes()
            if data and not data.endswith(b"\n"):
                with open(self.path, "r+b") as fh:
                    fh.truncate(data.rfind(b"\n") + 1)
        fresh = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = open(self.path, "a", encoding="utf-8")
        if fresh:
            self.write(header)

    def write(self, obj) -> None:
        self._fh.write(canonical_json(obj) + "\n")
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()


# ---------------------------------------------------------------- result store


class ResultStore:
    """Append-only result log keyed by task id; later duplicates are ignored."""

    def __init__(self, path=None, *, fsync: bool = False):
        self._lock = threading.Lock()
        self._records: dict = {}
        self._writer = None
        if path is not None:
            path = Path(path)
            if path.exists() and path.stat().st_size > 0:
                for row in _read_jsonl(path, STORE_FORMAT)[1:]:
                    rec = ResultRecord.from_dict(row)
                    self._records.setdefault(rec.task_id, rec)
            self._writer = _JsonlWriter(path, {"format": STORE_FORMAT, "version": FORMAT_VERSION}, fsync)

    def add(self, record: ResultRecord) -> bool:
        """Store ``record``; returns False (and stores nothing) for a task id already present."""
        with self._lock:
            if record.task_id in self._records:
                return False
            if self._writer is not None:
                self._writer.write(record.to_dict())
            self._records[record.task_id] = record
            return True

    def get(self, task_id) -> Optional[ResultRecord]:
        with self._lock:
            return self._records.get(task_id)

    def __contains__(self, task_id) -> bool:
        with self._lock:
            return task_id in self._records

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def records(self) -> list:
        with self._lock:
            return list(self._records.values())

    def close(self) -> None:
        if self._writer is not None:
            self._writer.close()


# ---------------------------------------------------------------- broker


class Broker:
    """Named FIFO queues with atomic claims, completions and a replayable journal."""

    def __init__(self, queues: Iterable[str], journal=None, store: Optional[ResultStore] = None, *,
                 clock: Callable[[], float] = time.monotonic, fsync: bool = False,
                 visibility_factor: float = VISIBILITY_FACTOR, max_attempts: int = MAX_ATTEMPTS,
                 time_scale: float = 1.0):
        queues = list(dict.fromkeys(queues))
        if not queues:
            raise ConfigurationError("at least one queue is required")
        if max_attempts < 1 or not visibility_factor > 0:
            raise InvalidArgument("max_attempts must be >= 1 and visibility_factor > 0")
        self._lock = threading.RLock()
        self._queues = {q: [] for q in queues}  # ids ordered by enqueue sequence
        self._tasks: dict = {}
        self._seq = 0
        self.store = store if store is not None else ResultStore()
        self.clock = clock
        self.visibility_factor = visibility_factor
        self.max_attempts = max_attempts
        self.time_scale = time_scale
        self._writer = None
        if journal is not None:
            self._writer = _JsonlWriter(journal, {"format": JOURNAL_FORMAT, "version": FORMAT_VERSION,
                                                  "queues": queues, "visibility_factor": visibility_factor,
                                                  "max_attempts": max_attempts}, fsync)

    # -- helpers

    @property
    def queue_names(self) -> tuple:
        return tuple(self._queues)

    def _now(self, now):
        return float(self.clock() if now is None else now)

    def _log(self, event_type, task: Task, now, data=None):
        if self._writer is not None:
            self._writer.write({"event_type": event_type, "task_id": task.id, "queue": task.queue_name,
                                "timestamp": now, "payload_digest": digest(task.descriptor()), "data": data or {}})

    def _check_time(self, task: Task, now):
        last = max(t for t in (task.enqueue_time, task.claim_time, task.done_time, -np.inf) if t is not None)
        if now < last:
            raise StateViolation(f"task {task.id}: timestamp {now} precedes its previous transition at {last}")

    # -- operations

    def enqueue(self, task: Task, now=None) -> str:
        with self._lock:
            if task.queue_name not in self._queues:
                raise ConfigurationError(f"unknown queue {task.queue_name!r}; configured: {list(self._queues)}")
            if task.id in self._tasks:
                raise InvalidArgument(f"task id {task.id!r} already enqueued")
            now = self._now(now)
            t = replace(task, state="queued", enqueue_time=now, claim_time=None, done_time=None, attempt=0,
                        worker_id=None, seq=self._seq, payload=dict(task.payload))
            self._log("enqueue", t, now, {"task": t.descriptor()})
            self._seq += 1
            self._tasks[t.id] = t
            self._queues[t.queue_name].append(t.id)
            return t.id

    def poll(self, worker: WorkerProfile, now=None) -> Optional[Task]:
        """Claim the oldest task of the highest-priority non-empty queue the worker services."""
        with self._lock:
            for q in worker.serviced_queues:
                ids = self._queues.get(q)
                if ids:
                    now = self._now(now)
                    t = self._tasks[ids[0]]
                    self._check_time(t, now)
                    self._log("claim", t, now, {"worker_id": worker.id})
                    ids.pop(0)
                    t.state, t.claim_time, t.attempt, t.worker_id = "claimed", now, t.attempt + 1, worker.id
                    return replace(t, payload=dict(t.payload))
            return None

    def complete(self, task_id: str, observation: Observation, worker_id: Optional[str] = None, now=None) -> Ack:
        """Record a result; a repeated completion is acknowledged as a duplicate."""
        with self._lock:
            t = self._tasks.get(task_id)
            if t is None:
                raise StateViolation(f"task {task_id!r} was never enqueued")
            if t.state in ("done", "failed"):
                return Ack(task_id, True)
            if t.state != "claimed":
                raise StateViolation(f"task {task_id!r} is {t.state}, only claimed tasks can complete")
            now = self._now(now)
            self._check_time(t, now)
            wid = worker_id if worker_id is not None else t.worker_id
            fresh = self.store.add(ResultRecord(task_id, observation, wid, t.attempt))
            self._log("done", t, now, {"worker_id": wid})
            t.state, t.done_time = "done", now
            return Ack(task_id, not fresh)

    def fail(self, task_id: str, now=None, reason: str = "") -> Ack:
        """Give up on a claimed task; it surfaces as an infeasible observation."""
        with self._lock:
            t = self._tasks.get(task_id)
            if t is None or t.state not in ("claimed", "done", "failed"):
                raise StateViolation(f"task {task_id!r} is not claimed")
            if t.state != "claimed":
                return Ack(task_id, True)
            now = self._now(now)
            self._check_time(t, now)
            obs = Observation(t.point, t.level, float("nan"), feasible=False, task_id=t.id)
            fresh = self.store.add(ResultRecord(task_id, obs, t.worker_id or "", t.attempt))
            self._log("failed", t, now, {"reason": reason})
            t.state, t.done_time = "failed", now
            return Ack(task_id, not fresh)

    def requeue(self, task_id: str, now=None) -> None:
        with self._lock:
            t = self._tasks.get(task_id)
            if t is None or t.state != "claimed":
                raise StateViolation(f"task {task_id!r} is not claimed")
            now = self._now(now)
            self._check_time(t, now)
            self._log("requeue", t, now)
            t.state, t.worker_id = "queued", None
            ids = self._queues[t.queue_name]
            seqs = [self._tasks[i].seq for i in ids]
            ids.insert(bisect.bisect(seqs, t.seq), t.id)

    def deadline(self, task: Task) -> float:
        return task.claim_time + self.visibility_factor * task.walltime * self.time_scale

    def expire(self, now=None) -> list:
        """Requeue (or fail, after ``max_attempts``) claims older than the visibility timeout."""
        with self._lock:
            now = self._now(now)
            out = []
            for t in sorted(self._tasks.values(), key=lambda t: t.seq):
                if t.state == "claimed" and now >= self.deadline(t):
                    if t.attempt >= self.max_attempts:
                        self.fail(t.id, now, "max attempts exceeded")
                    else:
                        self.requeue(t.id, now)
                    out.append(t.id)
            return out

    # -- inspection

    def task(self, task_id: str) -> Task:
        with self._lock:
            t = self._tasks[task_id]
            return replace(t, payload=dict(t.payload))

    def tasks(self) -> list:
        with self._lock:
            return [replace(t, payload=dict(t.payload)) for t in sorted(self._tasks.values(), key=lambda t: t.seq)]

    def resolved(self, task_id: str) -> bool:
        with self._lock:
            return self._tasks[task_id].state in ("done", "failed")

    def pending(self) -> int:
        with self._lock:
            return sum(t.state in ("queued", "claimed") for t in self._tasks.values())

    def snapshot(self) -> str:
        """Canonical serialization of every queue and task."""
        with self._lock:
            return canonical_json({
                "queues": {q: list(ids) for q, ids in self._queues.items()},
                "tasks": [self._tasks[k].to_dict() for k in sorted(self._tasks)],
            })

    def close(self) -> None:
        if self._writer is not None:
            self._writer.close()
            self._writer = None

    # -- recovery

    @classmethod
    def replay(cls, journal, store: Optional[ResultStore] = None, *, attach: bool = False, fsync: bool = False,
               **kwargs) -> "Broker":
        """Rebuild a broker from its journal; with ``attach`` it keeps appending to that journal."""
        path = Path(journal)
        rows = _read_jsonl(path, JOURNAL_FORMAT)
        header = rows[0]
        b = cls(header["queues"], None, store, visibility_factor=header.get("visibility_factor", VISIBILITY_FACTOR),
                max_attempts=header.get("max_attempts", MAX_ATTEMPTS), **kwargs)
        # records are attached straight to the store during the original run; avoid re-adding here
        sink = ResultStore()
        real_store, b.store = b.store, sink
        for k, ev in enumerate(rows[1:], start=2):
            try:
                kind, tid, now, data = ev["event_type"], ev["task_id"], ev["timestamp"], ev["data"]
                if kind == "enqueue":
                    d = data["task"]
                    task = Task(d["id"], d["queue"], DesignPoint(tuple(d["point"])), d["level"], d["payload"])
                    b.enqueue(task, now)
                elif kind == "claim":
                    t = b._tasks[tid]
                    q = b._queues[t.queue_name]
                    if not q or q[0] != tid:
                        raise StateViolation(f"claim of {tid} out of queue order")
                    b.poll(WorkerProfile(data["worker_id"], (t.queue_name,)), now)
                elif kind == "done":
                    t = b._tasks[tid]
                    b.complete(tid, Observation(t.point, t.level, 0.0, task_id=tid), data["worker_id"], now)
                elif kind == "failed":
                    b.fail(tid, now, data.get("reason", ""))
                elif kind == "requeue":
                    b.requeue(tid, now)
                else:
                    raise IntegrityError(path, f"line {k}: unknown event type {kind!r}")
                if ev["payload_digest"] != digest(b._tasks[tid].descriptor()):
                    raise IntegrityError(path, f"line {k}: payload digest mismatch for task {tid}")
            except (KeyError, TypeError, StateViolation, ConfigurationError, InvalidArgument) as exc:
                raise IntegrityError(path, f"line {k}: inconsistent event ({exc})") from None
        b.store = real_store
        if attach:
            b._writer = _JsonlWriter(path, header, fsync)
        return b


def default_queues(workers: Sequence[WorkerProfile]) -> list:
    return list(dict.fromkeys(q for w in workers for q in w.serviced_queues))


def worker_counts(workers: Sequence[WorkerProfile]) -> dict:
    """Workers able to serve each queue (a worker counts toward every queue it services)."""
    out: dict = {}
    for w in workers:
        for q in w.serviced_queues:
            out[q] = out.get(q, 0) + 1
    return out


def _failure_draw(seed: int, task_id: str, attempt: int) -> tuple:
    key = int.from_bytes(hashlib.sha256(f"{task_id}#{attempt}".encode()).digest()[:8], "little")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) % 2**63, key]))
    return float(rng.random()), float(rng.random())


# ---------------------------------------------------------------- virtual clock


@dataclass
class ExecutionTrace:
    start_time: float
    end_time: float
    events: list
    unresolved: list

    @property
    def makespan(self) -> float:
        return self.end_time - self.start_time

    def intervals(self) -> dict:
        """Per-worker ``(start, end, task_id)`` service intervals (completed or cut short by death)."""
        out: dict = {}
        open_: dict = {}
        for ev in self.events:
            if ev["event"] == "claim":
                open_[ev["worker_id"]] = (ev["time"], ev["task_id"])
            elif ev["event"] in ("done", "death"):
                start, tid = open_.pop(ev["worker_id"])
                out.setdefault(ev["worker_id"], []).append((start, ev["time"], tid))
        return out

    def to_dict(self) -> dict:
        return {"start_time": self.start_time, "end_time": self.end_time, "makespan": self.makespan,
                "events": self.events, "unresolved": self.unresolved}


def _default_evaluate(task: Task) -> Observation:
    return Observation(task.point, task.level, 0.0, task_id=task.id)


def run_simulated(workers: Sequence[WorkerProfile], tasks: Sequence[Task] = (), *, broker: Optional[Broker] = None,
                  evaluate: Callable[[Task], Observation] = _default_evaluate, seed: int = 0,
                  start_time: float = 0.0, latency: Optional[Mapping[str, float]] = None,
                  restart_delay: float = 0.0) -> ExecutionTrace:
    """Discrete-event execution of ``tasks`` on ``workers`` with a virtual clock.

    Service time is ``walltime / speed_factor + latency[queue]``. A worker
    dies mid-task with probability ``failure_rate`` (drawn from a stream keyed
    by seed, task id and attempt), restarts after ``restart_delay``, and the
    orphaned claim is requeued once its visibility timeout passes. Runs until
    every given task is resolved or nothing can make progress.
    """
    workers = list(workers)
    ids = [w.id for w in workers]
    if len(set(ids)) != len(ids):
        raise InvalidArgument("worker ids must be unique")
    if broker is None:
        broker = Broker(default_queues(workers) + [t.queue_name for t in tasks])
    latency = dict(latency or {})
    for t in tasks:
        broker.enqueue(t, start_time)
    watch = [t.id for t in tasks] or [t.id for t in broker.tasks() if t.state in ("queued", "claimed")]

    heap: list = []
    counter = 0
    events: list = []
    idle = list(range(len(workers)))
    now = start_time
    end = start_time

    def push(time_, kind, w, task=None):
        nonlocal counter
        heapq.heappush(heap, (time_, counter, kind, w, task))
        counter += 1

    def dispatch(now):
        for w in sorted(idle):
            worker = workers[w]
            task = broker.poll(worker, now)
            if task is None:
                continue
            idle.remove(w)
            events.append({"time": now, "event": "claim", "task_id": task.id, "worker_id": worker.id,
                           "attempt": task.attempt})
            service = task.walltime / worker.speed_factor + float(latency.get(task.queue_name, 0.0))
            die, frac = _failure_draw(seed, task.id, task.attempt)
            if die < worker.failure_rate:
                push(now + frac * service, "death", w, task)
            else:
                push(now + service, "done", w, task)
            push(broker.deadline(task), "expire", -1, task)

    def all_resolved():
        return all(broker.resolved(i) for i in watch)

    dispatch(now)
    while heap and not all_resolved():
        now, _, kind, w, task = heapq.heappop(heap)
        if kind == "done":
            obs = replace(evaluate(task), task_id=task.id, walltime_actual=now - task.claim_time)
            ack = broker.complete(task.id, obs, workers[w].id, now)
            events.append({"time": now, "event": "done", "task_id": task.id, "worker_id": workers[w].id,
                           "attempt": task.attempt, "duplicate": ack.duplicate})
            end = max(end, now)
            idle.append(w)
        elif kind == "death":
            events.append({"time": now, "event": "death", "task_id": task.id, "worker_id": workers[w].id,
                           "attempt": task.attempt})
            push(now + restart_delay, "restart", w)
        elif kind == "restart":
            idle.append(w)
        elif kind == "expire":
            live = broker.task(task.id)
            if live.state == "claimed" and live.attempt == task.attempt:
                for tid in broker.expire(now):
                    t = broker.task(tid)
                    events.append({"time": now, "event": "requeue" if t.state == "queued" else "failed",
                                   "task_id": tid, "worker_id": None, "attempt": t.attempt})
                end = max(end, now)
        dispatch(now)
    unresolved = [i for i in watch if not broker.resolved(i)]
    return ExecutionTrace(start_time, end, events, unresolved)


# ---------------------------------------------------------------- real clock


def run_threaded(workers: Sequence[WorkerProfile], tasks: Sequence[Task] = (), *, broker: Optional[Broker] = None,
                 evaluate: Callable[[Task], Observation] = _default_evaluate, seed: int = 0,
                 time_scale: float = 1e-3, poll_interval: float = 5e-4, stop: Optional[threading.Event] = None,
                 timeout: Optional[float] = None) -> ExecutionTrace:
    """Run workers as threads that actually sleep ``walltime * time_scale / speed_factor``.

    A monitor thread requeues expired claims. Returns when every watched
    task is resolved, ``stop`` is set, or ``timeout`` seconds pass.
    """
    if broker is None:
        broker = Broker(default_queues(workers) + [t.queue_name for t in tasks], time_scale=time_scale)
    # a replayed broker carries timestamps from the earlier run; continue after them
    start = max((x for t in broker.tasks() for x in (t.enqueue_time, t.claim_time, t.done_time) if x is not None),
                default=0.0)
    t0 = time.monotonic()
    clock = lambda: start + (time.monotonic() - t0)
    broker.clock = clock
    broker.time_scale = time_scale
    stop = stop or threading.Event()
    for t in tasks:
        broker.enqueue(t)
    watch = [t.id for t in tasks] or [t.id for t in broker.tasks() if t.state in ("queued", "claimed")]
    events: list = []
    ev_lock = threading.Lock()

    def note(**ev):
        with ev_lock:
            events.append(ev)

    def finished():
        return stop.is_set() or all(broker.resolved(i) for i in watch)

    def work(worker: WorkerProfile):
        while not finished():
            task = broker.poll(worker)
            if task is None:
                time.sleep(poll_interval)
                continue
            note(time=clock(), event="claim", task_id=task.id, worker_id=worker.id, attempt=task.attempt)
            service = task.walltime * time_scale / worker.speed_factor
            die, frac = _failure_draw(seed, task.id, task.attempt)
            if die < worker.failure_rate:
                time.sleep(frac * service)
                note(time=clock(), event="death", task_id=task.id, worker_id=worker.id, attempt=task.attempt)
                continue
            time.sleep(service)
            if stop.is_set():
                return
            obs = replace(evaluate(task), task_id=task.id, walltime_actual=service)
            try:
                ack = broker.complete(task.id, obs, worker.id)
            except StateViolation:
                # claim expired and the task went back to the queue; the retry will record it
                note(time=clock(), event="late", task_id=task.id, worker_id=worker.id, attempt=task.attempt)
                continue
            note(time=clock(), event="done", task_id=task.id, worker_id=worker.id, attempt=task.attempt,
                 duplicate=ack.duplicate)

    def monitor():
        while not finished():
            for tid in broker.expire():
                note(time=clock(), event="expire", task_id=tid, worker_id=None, attempt=None)
            time.sleep(poll_interval)

    threads = [threading.Thread(target=work, args=(w,), daemon=True) for w in workers]
    threads.append(threading.Thread(target=monitor, daemon=True))
    for th in threads:
        th.start()
    deadline = None if timeout is None else time.monotonic() + timeout
    while not finished():
        if deadline is not None and time.monotonic() > deadline:
            stop.set()
            break
        time.sleep(poll_interval)
    stop.set()
    for th in threads:
        th.join()
    with ev_lock:
        evs = sorted(events, key=lambda e: e["time"])
    end = max((e["time"] for e in evs if e["event"] == "done"), default=start)
    return ExecutionTrace(start, end, evs, [i for i in watch if not broker.resolved(i)])


__all__ = [
    "Ack",
    "Broker",
    "ExecutionTrace",
    "ResultRecord",
    "ResultStore",
    "Task",
    "WorkerProfile",
    "canonical_json",
    "default_queues",
    "run_simulated",
    "run_threaded",
    "worker_counts",
]
