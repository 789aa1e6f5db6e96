"""Command line: run a scenario, sweep it over seeds, or re-check a recorded trace.

Exit codes: 0 all checks pass, 2 configuration error, 3 checker violation.
``TSMR_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .core import ConfigError
from .scenario_file import ScenarioSpec, bundled_names, load
from .sim.checkers import all_ok, check_run
from .sim.report import build_report, dumps
from .sim.simulator import TRACE_SCHEMA, run

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 2, 3


def _liveness_checked(spec: ScenarioSpec) -> bool:
    generator = spec.doc.get("generator")
    return generator is None or generator.get("liveness", False)


def run_one(spec: ScenarioSpec, seed: Optional[int] = None) -> tuple[dict, list[dict]]:
    """Simulate and check one seed; returns the report and the trace."""
    result = run(spec.build(seed))
    verdicts = check_run(result.trace, liveness=_liveness_checked(spec))
    return build_report(result, verdicts), result.trace


def write_trace(path: Path, trace: Sequence[dict]) -> None:
    with path.open("w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trace(path: Path) -> list[dict]:
    with path.open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def parse_seeds(text: str) -> range:
    """``A..B`` (inclusive) or a single seed."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = range(int(lo), int(hi) + 1)
        else:
            seeds = range(int(text), int(text) + 1)
    except ValueError:
        raise ConfigError(f"seeds must look like A..B, got {text!r}") from None
    if not seeds:
        raise ConfigError(f"empty seed range {text!r}")
    return seeds


def cmd_run(args) -> int:
    spec = load(args.scenario)
    report, trace = run_one(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    report_path.write_text(dumps(report))
    trace_path = out / "trace.jsonl"
    if args.trace or not report["ok"]:
        write_trace(trace_path, trace)
    failing = sorted(name for name, v in report["checks"].items() if not v["ok"])
    if failing:
        print(f"FAIL {spec.name} seed={report['seed']}: {', '.join(failing)}")
        print(f"report: {report_path}")
        print(f"trace: {trace_path}")
        return EXIT_VIOLATION
    print(f"ok {spec.name} seed={report['seed']} commands={report['commands']['returned']}")
    print(f"report: {report_path}")
    return EXIT_OK


def _sweep_worker(job: tuple[ScenarioSpec, int]) -> tuple[int, list[str], dict]:
    spec, seed = job
    report, _ = run_one(spec, seed)
    failing = sorted(name for name, v in report["checks"].items() if not v["ok"])
    return seed, failing, report["fast_path"]


def cmd_sweep(args) -> int:
    spec = load(args.scenario)
    seeds = parse_seeds(args.seeds)
    jobs = [(spec, s) for s in seeds]
    workers = args.workers or os.cpu_count() or 1
    if workers == 1:
        results = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs, chunksize=8))
    failed = [(seed, names) for seed, names, _ in results if names]
    fast = sum(fp["fast"] for _, _, fp in results)
    slow = sum(fp["slow"] for _, _, fp in results)
    summary = {
        "scenario": spec.name,
        "seeds": [seeds.start, seeds.stop - 1],
        "runs": len(results),
        "passed": len(results) - len(failed),
        "failed": {str(seed): names for seed, names in failed},
        "fast_path": {"fast": fast, "slow": slow},
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"{spec.name}: {summary['passed']}/{summary['runs']} seeds passed")
    for seed, names in failed:
        print(f"  seed {seed}: {', '.join(names)}")
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_check(args) -> int:
    path = Path(args.trace)
    try:
        trace = read_trace(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read trace {path}: {exc}") from exc
    if not trace or trace[0].get("kind") != "meta" or trace[0].get("schema") != TRACE_SCHEMA:
        raise ConfigError(f"{path} does not start with a schema {TRACE_SCHEMA} meta record")
    verdicts = check_run(trace)
    for name, v in sorted(verdicts.items()):
        state = "skip" if v.skipped else ("ok" if v.ok else "FAIL")
        print(f"{state:4} {name}")
    return EXIT_OK if all_ok(verdicts) else EXIT_VIOLATION


def cmd_list(args) -> int:
    for name in bundled_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsmr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and write report.json")
    p.add_argument("scenario", help="scenario file or bundled scenario name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", action="store_true", help="also write trace.jsonl")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario over a range of seeds")
    p.add_argument("scenario")
    p.add_argument("--seeds", required=True, help="inclusive range A..B")
    p.add_argument("--workers", type=int, default=0, help="worker processes (default: CPU count)")
    p.add_argument("--out", default=None, help="directory for sweep.json")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="re-run every checker over a trace.jsonl")
    p.add_argument("trace")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("list", help="list bundled scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("TSMR_LOG", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
