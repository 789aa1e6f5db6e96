"""Whole-run correctness checks computed from a trace.

Every check takes the list of trace records (as produced by the simulator
or read back from a JSONL trace file) and returns a :class:`Verdict`.
"""

from __future__ import annotations

import graphlib
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

MAX_EVIDENCE = 10


@dataclass
class Verdict:
    name: str
    ok: bool
    skipped: bool = False
    detail: str = ""
    evidence: list = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {"ok": self.ok, "skipped": self.skipped, "detail": self.detail}
        if self.evidence:
            out["evidence"] = self.evidence[:MAX_EVIDENCE]
        return out


def _partition(pid: str) -> int:
    return int(pid.split(":")[0])


def _site(pid: str) -> int:
    return int(pid.split(":")[1])


class TraceIndex:
    """One pass over the trace, grouping records by what the checks look at."""

    def __init__(self, records: Iterable[dict]):
        self.meta: dict = {}
        self.records: list[dict] = []
        self.submits: dict[str, dict] = {}
        self.returns: dict[str, dict] = {}
        self.execs: dict[str, list[dict]] = defaultdict(list)
        self.commits: list[dict] = []
        self.fun_ts: dict[tuple[str, int], dict[str, int]] = defaultdict(dict)
        self.decisions: list[dict] = []
        self.recoveries: list[dict] = []
        self.crashes: list[dict] = []
        self.errors: list[dict] = []
        self.sends: dict[str, list[dict]] = defaultdict(list)
        for rec in records:
            self.records.append(rec)
            kind = rec["kind"]
            if kind == "meta":
                self.meta = rec
            elif kind == "submit":
                self.submits[rec["id"]] = rec
            elif kind == "return":
                self.returns[rec["id"]] = rec
            elif kind == "exec":
                self.execs[rec["src"]].append(rec)
            elif kind == "commit":
                self.commits.append(rec)
            elif kind == "fun_ts":
                self.fun_ts[(rec["id"], rec["partition"])][rec["src"]] = rec["ts"]
            elif kind == "decision":
                self.decisions.append(rec)
            elif kind == "recovery":
                self.recoveries.append(rec)
            elif kind == "crash":
                self.crashes.append(rec)
            elif kind == "error":
                self.errors.append(rec)
            elif kind == "send":
                self.sends[rec["type"]].append(rec)

    @property
    def r(self) -> int:
        return self.meta["r"]

    @property
    def f(self) -> int:
        return self.meta["f"]

    def crashed(self, pid: str) -> bool:
        p, s = _partition(pid), _site(pid)
        return any(c["site"] == s and c["partition"] in (None, p) for c in self.crashes)


def check_runtime(ix: TraceIndex) -> Verdict:
    return Verdict("runtime_assertions", not ix.errors, detail=f"{len(ix.errors)} protocol errors",
                   evidence=ix.errors)


def check_validity(ix: TraceIndex) -> Verdict:
    bad = []
    for pid, execs in ix.execs.items():
        seen = set()
        for rec in execs:
            if rec["id"] in seen or rec["id"] not in ix.submits:
                bad.append(rec)
            seen.add(rec["id"])
    return Verdict("validity", not bad, detail="each command executed at most once per process, only if submitted",
                   evidence=bad)


def check_log_equality(ix: TraceIndex) -> Verdict:
    by_partition: dict[int, list[tuple[str, list[str]]]] = defaultdict(list)
    for pid, execs in ix.execs.items():
        by_partition[_partition(pid)].append((pid, [rec["id"] for rec in execs]))
    bad = []
    for p, logs in sorted(by_partition.items()):
        longest_pid, longest = max(logs, key=lambda item: (len(item[1]), item[0]))
        for pid, seq in logs:
            if longest[: len(seq)] != seq:
                k = next(n for n, (a, b) in enumerate(zip(seq, longest)) if a != b)
                bad.append({"partition": p, "process": pid, "other": longest_pid, "position": k,
                            "got": seq[k], "expected": longest[k]})
    return Verdict("log_equality", not bad, detail="replicas of a partition execute prefix-equal sequences",
                   evidence=bad)


def check_ordering(ix: TraceIndex) -> Verdict:
    """The union of per-process execution order and real-time order has no cycle."""
    graph: dict = defaultdict(set)
    for execs in ix.execs.values():
        for a, b in zip(execs, execs[1:]):
            graph[("cmd", b["id"])].add(("cmd", a["id"]))
    # returns sort before submits at the same instant: a client submitting when
    # another command returns has observed that return
    points = sorted(
        [(rec["t"], 0, n, rec["id"]) for n, rec in enumerate(ix.returns.values())]
        + [(rec["t"], 1, n, rec["id"]) for n, rec in enumerate(ix.submits.values())]
    )
    current = None
    made = 0
    for _, order, _, cid in points:
        if order == 0:
            node = ("time", made)
            made += 1
            graph[node].add(("cmd", cid))
            if current is not None:
                graph[node].add(current)
            current = node
        elif current is not None:
            graph[("cmd", cid)].add(current)
    try:
        tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        cycle = [n[1] for n in exc.args[1] if n[0] == "cmd"]
        return Verdict("ordering", False, detail="precedence cycle", evidence=[{"cycle": cycle}])
    return Verdict("ordering", True, detail="execution and real-time precedence is acyclic")


def check_liveness(ix: TraceIndex) -> Verdict:
    if ix.meta.get("max_crashes", 0) > ix.f:
        return Verdict("liveness", True, skipped=True, detail="insufficient replicas: more than f crashes")
    executed = {(pid, rec["id"]) for pid, execs in ix.execs.items() for rec in execs}
    missing = []
    for cid, rec in ix.submits.items():
        if ix.crashed(rec["src"]):
            continue
        for p in rec["partitions"]:
            for site in ix.meta["placement"]:
                pid = f"{p}:{site}"
                if not ix.crashed(pid) and (pid, cid) not in executed:
                    missing.append({"id": cid, "process": pid})
    return Verdict("liveness", not missing, detail=f"{len(missing)} missing executions", evidence=missing)


def check_property1(ix: TraceIndex) -> Verdict:
    seen: dict[tuple, dict] = {}
    bad = []
    for rec in ix.sends["MCommit"]:
        key = (rec["id"], rec["partition"])
        first = seen.setdefault(key, rec)
        if first["ts"] != rec["ts"]:
            bad.append([first, rec])
    return Verdict("property1_commit_agreement", not bad, detail="one committed timestamp per command and partition",
                   evidence=bad)


def check_property2(ix: TraceIndex) -> Verdict:
    majority = ix.r // 2 + 1
    bad = []
    done = set()
    for rec in ix.sends["MCommit"]:
        key = (rec["id"], rec["partition"])
        if key in done:
            continue
        done.add(key)
        outputs = ix.fun_ts.get(key, {})
        t = rec["ts"]
        if t not in outputs.values() or sum(1 for u in outputs.values() if u <= t) < majority:
            bad.append({"id": rec["id"], "partition": rec["partition"], "ts": t, "proposals": outputs})
    return Verdict("property2_majority_max", not bad,
                   detail="committed timestamp is the max of proposals by a majority", evidence=bad)


def check_property3(ix: TraceIndex) -> Verdict:
    half = ix.r // 2
    bad = []
    for rec in ix.decisions:
        if rec["path"] != "fast":
            continue
        others = [u for j, u in rec["proposals"].items() if j != rec["coordinator"]]
        for subset in itertools.combinations(others, half):
            if max(subset) != rec["ts"]:
                bad.append({"decision": rec, "subset": list(subset)})
                break
    return Verdict("property3_fast_path_recoverable", not bad,
                   detail="every floor(r/2) fast-quorum members besides the coordinator hold the max", evidence=bad)


def check_stability(ix: TraceIndex) -> Verdict:
    bad = [rec for rec in ix.commits if rec["partition_ts"] <= rec["stable_before"]]
    return Verdict("stability_monitor", not bad,
                   detail="a command commits above the stable timestamp of the committing process", evidence=bad)


def check_invariant2(ix: TraceIndex) -> Verdict:
    seen: dict[tuple, dict] = {}
    bad = []
    for rec in ix.sends["MConsensus"]:
        first = seen.setdefault((rec["id"], rec["partition"], rec["ballot"]), rec)
        if first["ts"] != rec["ts"]:
            bad.append([first, rec])
    return Verdict("invariant2_one_value_per_ballot", not bad, evidence=bad)


def check_invariant3(ix: TraceIndex) -> Verdict:
    bad = [rec for rec in ix.sends["MRecAck"] if not rec["abal"] < rec["ballot"]]
    return Verdict("invariant3_abal_below_ballot", not bad, evidence=bad)


def _ordered_sends(ix: TraceIndex, types: tuple[str, ...]) -> list[dict]:
    wanted = set(types)
    return [rec for rec in ix.records if rec["kind"] == "send" and rec["type"] in wanted]


def check_invariant4(ix: TraceIndex) -> Verdict:
    acked: dict[tuple[str, str], list[int]] = defaultdict(list)
    bad = []
    for rec in _ordered_sends(ix, ("MConsensusAck", "MRecAck")):
        key = (rec["id"], rec["src"])
        if rec["type"] == "MConsensusAck":
            acked[key].append(rec["ballot"])
            continue
        below = [b for b in acked[key] if b < rec["ballot"]]
        if below and (rec["abal"] == 0 or rec["abal"] < max(below)):
            bad.append(rec)
    return Verdict("invariant4_recovery_reports_accepted", not bad, evidence=bad)


def check_invariant7(ix: TraceIndex) -> Verdict:
    f = ix.f
    proposed: dict[tuple, int] = {}
    ackers: dict[tuple, set] = defaultdict(set)
    chosen: dict[tuple, tuple[int, int]] = {}
    bad = []
    for rec in _ordered_sends(ix, ("MConsensus", "MConsensusAck")):
        if rec["type"] == "MConsensus":
            key = (rec["id"], rec["partition"])
            proposed.setdefault((*key, rec["ballot"]), rec["ts"])
            if key in chosen:
                b, t = chosen[key]
                if rec["ballot"] > b and rec["ts"] != t:
                    bad.append({"chosen_ballot": b, "chosen_ts": t, "later": rec})
            continue
        key = (rec["id"], _partition(rec["src"]))
        slot = (*key, rec["ballot"])
        ackers[slot].add(rec["src"])
        if len(ackers[slot]) == f + 1 and slot in proposed:
            b, _ = chosen.get(key, (rec["ballot"], None))
            if b >= rec["ballot"]:
                chosen[key] = (rec["ballot"], proposed[slot])
    return Verdict("invariant7_chosen_value_sticks", not bad, evidence=bad)


def check_invariant8(ix: TraceIndex) -> Verdict:
    fast = {(rec["id"], rec["partition"]): rec["ts"] for rec in ix.decisions if rec["path"] == "fast"}
    bad = [rec for rec in ix.sends["MConsensus"]
           if (rec["id"], rec["partition"]) in fast and rec["ts"] != fast[(rec["id"], rec["partition"])]]
    return Verdict("invariant8_recovery_keeps_fast_commit", not bad, evidence=bad)


CHECKS = (
    check_runtime, check_validity, check_log_equality, check_ordering, check_liveness,
    check_property1, check_property2, check_property3, check_stability,
    check_invariant2, check_invariant3, check_invariant4, check_invariant7, check_invariant8,
)


def check_run(records: Iterable[dict], liveness: bool = True) -> dict[str, Verdict]:
    """Run every check over a trace; ``liveness=False`` skips the liveness check."""
    ix = TraceIndex(records)
    out = {}
    for check in CHECKS:
        if check is check_liveness and not liveness:
            v = Verdict("liveness", True, skipped=True, detail="not requested")
        else:
            v = check(ix)
        out[v.name] = v
    return out


def all_ok(verdicts: dict[str, Verdict]) -> bool:
    return all(v.ok for v in verdicts.values())
