"""Run reports: latency percentiles, fast-path ratio and checker verdicts as versioned JSON."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from typing import Optional, Sequence

from .checkers import Verdict, all_ok
from .simulator import RunResult

REPORT_SCHEMA = 1
PERCENTILES = (50, 95, 99, 99.9)


def nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    """The nearest-rank ``q``-th percentile of an ascending sample."""
    if not sorted_values:
        raise ValueError("empty sample")
    rank = max(1, math.ceil(q / 100 * len(sorted_values)))
    return sorted_values[rank - 1]


def latency_summary(values: Sequence[float]) -> dict:
    ordered = sorted(values)
    out: dict = {"count": len(ordered)}
    if not ordered:
        return out
    out["mean"] = round(sum(ordered) / len(ordered), 6)
    for q in PERCENTILES:
        out[f"p{q:g}"] = nearest_rank(ordered, q)
    out["max"] = ordered[-1]
    return out


def commit_to_execute_gaps(trace: Sequence[dict]) -> list[float]:
    """Per (process, command): time from local commit to local execution."""
    committed: dict = {}
    gaps = []
    for rec in trace:
        if rec["kind"] == "commit":
            committed[(rec["src"], rec["id"])] = rec["t"]
        elif rec["kind"] == "exec":
            at = committed.get((rec["src"], rec["id"]))
            if at is not None:
                gaps.append(rec["t"] - at)
    return gaps


def fast_path_stats(trace: Sequence[dict]) -> dict:
    counts: dict = defaultdict(int)
    for rec in trace:
        if rec["kind"] == "decision":
            counts[rec["path"]] += 1
    total = counts["fast"] + counts["slow"]
    return {"fast": counts["fast"], "slow": counts["slow"],
            "ratio": round(counts["fast"] / total, 6) if total else None}


def build_report(result: RunResult, verdicts: dict[str, Verdict], site_names: Optional[Sequence[str]] = None) -> dict:
    s = result.scenario
    names = site_names or s.topology.sites
    trace = result.trace
    gaps = commit_to_execute_gaps(trace)
    all_latencies = [x for v in result.latencies.values() for x in v]
    return {
        "schema_version": REPORT_SCHEMA,
        "scenario": s.name,
        "seed": s.seed,
        "r": s.config.r,
        "f": s.config.f,
        "percentile_method": "nearest-rank",
        "sites": {names[site]: latency_summary(v) for site, v in sorted(result.latencies.items())},
        "overall": latency_summary(all_latencies),
        "commit_latency": {names[site]: latency_summary(v) for site, v in sorted(result.commit_latencies.items())},
        "fast_path": fast_path_stats(trace),
        "commands": {
            "submitted": sum(1 for rec in trace if rec["kind"] == "submit"),
            "returned": sum(1 for rec in trace if rec["kind"] == "return"),
        },
        "recoveries": sum(1 for rec in trace if rec["kind"] == "recovery"),
        "commit_to_execute_gap_max": max(gaps) if gaps else None,
        "end_time": result.end_time,
        "events": result.events,
        "checks": {name: v.as_dict() for name, v in sorted(verdicts.items())},
        "ok": all_ok(verdicts),
    }


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=str) + "\n"
