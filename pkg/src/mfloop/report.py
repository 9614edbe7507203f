"""Report files: JSON summaries and plot-ready CSV tables."""

from __future__ import annotations

import csv
import io
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .driver import CampaignReport

SUMMARY_FORMAT = "mfloop-summary"
SURFACE_POINTS = {1: 101, 2: 41}

ITERATION_COLUMNS = ("i", "kind", "T_i", "B_i", "selected_count", "benefit", "planned_cost", "planned_makespan",
                     "spent_T", "spent_B", "mean_variance", "best_value")
LEDGER_COLUMNS = ("i", "kind", "T_remaining_before", "B_remaining_before", "T_i", "B_i", "T_remaining_after",
                  "B_remaining_after", "spent_T", "spent_B", "terminated")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf)  # excel dialect: RFC 4180 quoting and CRLF line ends
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def observations_csv(report: CampaignReport) -> str:
    d = report.problem.domain.dim
    header = ["iteration", "task_id", "level"] + [f"x{j}" for j in range(d)] + [
        "value", "noise_var", "feasible", "walltime", "attempt", "worker_id"]
    rows = []
    for h in report.state.history:
        o = h["observation"]
        rows.append([h["iteration"], h["task_id"], o["level"], *o["point"], o["value"], o["noise_var"],
                     o["feasible"], o["walltime_actual"], h["attempt"], h["worker_id"]])
    return _csv(header, rows)


def iterations_csv(report: CampaignReport) -> str:
    rows = [[it["i"], it["kind"], it["T_i"], it["B_i"], len(it["selected"]), it["benefit"], it["planned_cost"],
             it["planned_makespan"], it["spent_T"], it["spent_B"], it["mean_variance"], it["best_value"]]
            for it in report.state.iterations]
    return _csv(ITERATION_COLUMNS, rows)


def ledger_csv(report: CampaignReport) -> str:
    return _csv(LEDGER_COLUMNS, [[row[k] for k in LEDGER_COLUMNS] for row in report.state.ledger])


def surface_grid(report: CampaignReport):
    """Rows ``(coords..., level, mean, variance, epistemic_var, trust_var)`` on a regular grid (d <= 2)."""
    s, p = report.surrogate, report.problem
    d = p.domain.dim
    if s is None or d not in SURFACE_POINTS:
        return None
    n = SURFACE_POINTS[d]
    axes = [np.linspace(0.0, 1.0, n)] * d
    U = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    X = p.domain.from_unit(U)
    rows = []
    for lev in range(s.L):
        mean, epi = s.epistemic(U, lev)
        tv = s.trust_var(U, lev)
        for k in range(len(U)):
            rows.append([*map(float, X[k]), lev, float(p.sign * mean[k]), float(epi[k] + tv[k]), float(epi[k]),
                         float(tv[k])])
    header = [f"x{j}" for j in range(d)] + ["level", "mean", "variance", "epistemic_var", "trust_var"]
    return header, rows


def summary(report: CampaignReport) -> dict:
    return {
        "format": SUMMARY_FORMAT,
        "version": 1,
        "name": report.config.name,
        "status": report.state.status,
        "best": report.best,
        "simple_regret": report.regret,
        "evaluations": len(report.state.history),
        "budget": report.state.budget.to_dict(),
        "ledger": report.state.ledger,
    }


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report: CampaignReport, out_dir) -> list:
    """Write every report file into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": report.to_json(),
        "summary.json": _dump(summary(report)),
        "observations.csv": observations_csv(report),
        "iterations.csv": iterations_csv(report),
        "ledger.csv": ledger_csv(report),
    }
    grid = surface_grid(report)
    if grid is not None:
        files["surface_grid.csv"] = _csv(*grid)
    written = []
    for name, text in files.items():
        path = out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)
    return written


def load_schema(name: str) -> dict:
    """JSON schema shipped with the package: ``"report"`` or ``"summary"``."""
    return json.loads(resources.files("mfloop").joinpath("schemas", f"{name}.schema.json").read_text("utf-8"))


REPORT_FILES = ("report.json", "summary.json", "observations.csv", "iterations.csv", "ledger.csv", "surface_grid.csv")

__all__ = [
    "REPORT_FILES",
    "iterations_csv",
    "ledger_csv",
    "load_schema",
    "observations_csv",
    "summary",
    "surface_grid",
    "write_report",
]
