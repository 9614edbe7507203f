"""Command-line entry point: ``mfloop {run,resume,report,validate,bench-list}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .bench import BENCHMARKS, DESCRIPTIONS
from .config import validate_file
from .driver import report_from_dir, resume_campaign, run_campaign
from .errors import ConfigurationError, IntegrityError
from .report import write_report

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CAMPAIGN_FAILED = 3
EXIT_INTEGRITY = 4
OUTPUT_ENV = "MFLOOP_OUTPUT_DIR"

log = logging.getLogger("mfloop")


def default_output_dir(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "mfloop-runs")) / name


def _print_outcome(report, out_dir) -> int:
    best = report.best
    print(f"status: {report.status}")
    for d in report.state.diagnostics:
        print(f"  note: {d}")
    if best is not None:
        unc = best.get("uncertainty", {})
        extra = f" +/- {unc['std']:.4g}" if unc else ""
        print(f"best: value {best['value']:.6g}{extra} at {best['point']}")
    if report.regret is not None:
        print(f"simple regret: {report.regret:.6g}")
    if out_dir is not None:
        print(f"output: {out_dir}")
    if report.status == "failed":
        return EXIT_CAMPAIGN_FAILED
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg, diags = validate_file(args.config)
    for d in diags:
        print(d)
    if diags:
        print(f"{len(diags)} problem(s) found")
        return EXIT_INVALID
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg, diags = validate_file(args.config)
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_INVALID
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.clock is not None:
        cfg = replace(cfg, clock=args.clock)
    out = Path(args.output_dir) if args.output_dir else default_output_dir(cfg.name)
    report = run_campaign(cfg, out, stop_after=args.stop_after)
    if not report.final:
        print(f"paused after {args.stop_after} iteration(s); resume with: mfloop resume {out}")
        return EXIT_OK
    return _print_outcome(report, out)


def cmd_resume(args) -> int:
    report = resume_campaign(args.directory, args.checkpoint, stop_after=args.stop_after)
    if not report.final:
        print(f"paused after {args.stop_after} more iteration(s)")
        return EXIT_OK
    return _print_outcome(report, args.directory)


def cmd_report(args) -> int:
    report = report_from_dir(args.directory)
    out = Path(args.output_dir) if args.output_dir else Path(args.directory)
    for path in write_report(report, out):
        print(path)
    return EXIT_CAMPAIGN_FAILED if report.status == "failed" else EXIT_OK


def cmd_bench_list(args) -> int:
    for name in sorted(BENCHMARKS):
        p = BENCHMARKS[name]()
        print(f"{name:18s} {p.L} level(s), {p.domain.dim}D, {p.direction}: {DESCRIPTIONS[name]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mfloop", description="Budgeted multi-fidelity acquisition campaigns.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a campaign from a config file")
    p.add_argument("config")
    p.add_argument("-o", "--output-dir", help=f"campaign directory (default ${OUTPUT_ENV}/<name>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--clock", choices=("virtual", "real"))
    p.add_argument("--stop-after", type=int, metavar="N", help="pause after N loop iterations")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a campaign from a checkpoint")
    p.add_argument("directory")
    p.add_argument("--checkpoint", help="checkpoint file (default: latest)")
    p.add_argument("--stop-after", type=int, metavar="N")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("report", help="write report files for a campaign directory")
    p.add_argument("directory")
    p.add_argument("-o", "--output-dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench-list", help="list built-in benchmark problems")
    p.set_defaults(func=cmd_bench_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
