"""Discrete-event simulation of a deployment: virtual time, latency-modelled delivery, crashes, clients."""

from __future__ import annotations

import heapq
import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..core import CommandId, PartitionId, ProcessId, closest_replicas, fast_quorums
from ..messages import MCommit, Message, Send, describe
from ..process import Process
from ..state import ProtocolError
from .detectors import FailureDetector
from .scenario import Scenario
from .workload import Client, KeyChooser

log = logging.getLogger(__name__)

TRACE_SCHEMA = 1

# message types whose sends the checkers need; the rest are only traced on request
CHECKED_TYPES = frozenset({"MCommit", "MConsensus", "MConsensusAck", "MRec", "MRecAck", "MRecNAck"})

# event kinds; events at the same instant run in scheduling order
_DELIVER, _SUBMIT, _RESULT, _PROMISE_TICK, _LIVENESS_TICK, _CRASH, _SUSPECT = range(7)


@dataclass
class RunResult:
    scenario: Scenario
    trace: list[dict]
    end_time: float
    events: int
    latencies: dict[int, list[float]] = field(default_factory=dict)
    commit_latencies: dict[int, list[float]] = field(default_factory=dict)
    runtime_errors: list[str] = field(default_factory=list)
    processes: dict[ProcessId, Process] = field(default_factory=dict)
    unfinished_clients: int = 0


class Simulation:
    """Runs one scenario to completion; also acts as the environment of every process."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.config = scenario.config
        self.topology = scenario.topology
        self.placement = scenario.placement
        self.now = 0.0
        self._queue: list = []
        self._seq = itertools.count()
        self.events = 0
        self.procs: dict[ProcessId, Process] = {}
        self._replicas: dict[PartitionId, tuple[ProcessId, ...]] = {}
        self._crashed: set[tuple[int, Optional[int]]] = set()
        faults = scenario.faults
        self.fd = FailureDetector(self.placement, self.config.fd_period, faults.gst, faults.flaky_leader,
                                  scenario.seed)
        self.net_rng = random.Random(f"{scenario.seed}:network")
        self.workload_rng = random.Random(f"{scenario.seed}:workload")
        self.trace_records: list[dict] = []
        self.runtime_errors: list[str] = []
        self._armed_promises: set[ProcessId] = set()
        self._armed_liveness: set[ProcessId] = set()
        self._last_stable: dict[ProcessId, int] = {}
        self._liveness_period = self.config.recovery_timeout / 4
        self._clients: list[Client] = []
        self._client_of: dict[str, Client] = {}
        self._keys = KeyChooser(scenario.workload)
        self._selftest_done = False
        self._initial = {(p, s): c for p, s, c in scenario.initial_clocks}
        self.latencies: dict[int, list[float]] = {s: [] for s in self.placement}
        self.commit_latencies: dict[int, list[float]] = {s: [] for s in self.placement}

    # environment interface used by processes

    def replicas(self, p: PartitionId) -> tuple[ProcessId, ...]:
        members = self._replicas.get(p)
        if members is None:
            members = self._replicas[p] = tuple(ProcessId(p, s) for s in self.placement)
        return members

    def rtt(self, a: ProcessId, b: ProcessId) -> float:
        return self.topology.rtt[a.site][b.site]

    def _suspected(self, partitions) -> frozenset:
        if not self.fd.crash_time:
            return frozenset()
        members = [j for p in partitions for j in self.replicas(p)]
        return self.fd.suspected(members, self.now)

    def fast_quorums(self, i: ProcessId, partitions) -> dict:
        return fast_quorums(i, partitions, self.replicas, self.rtt, self.config.fast_quorum_size,
                            self._suspected(partitions))

    def covering(self, i: ProcessId, partitions) -> dict:
        return closest_replicas(i, partitions, self.replicas, self.rtt, self._suspected(partitions))

    def leader(self, p: PartitionId, asker: ProcessId) -> ProcessId:
        return self.fd.leader(p, asker, self.now)

    def trace(self, kind: str, **fields) -> None:
        record = {"t": self.now, "kind": kind}
        for k, v in fields.items():
            record[k] = str(v) if isinstance(v, (ProcessId, CommandId)) else v
        self.trace_records.append(record)
        if kind == "exec":
            self._on_exec(record)
        elif kind == "commit":
            self._on_commit(record)

    def trace_send(self, src: ProcessId, dsts: Sequence[ProcessId], msg: Message) -> None:
        name = type(msg).__name__
        if name in CHECKED_TYPES or self.scenario.trace_all_messages:
            self.trace_records.append({"t": self.now, "kind": "send", "src": str(src),
                                       "dsts": [str(d) for d in dsts], **describe(msg)})

    # process management

    def crashed(self, pid: ProcessId) -> bool:
        return (pid.site, None) in self._crashed or (pid.site, pid.partition) in self._crashed

    def process(self, pid: ProcessId) -> Process:
        proc = self.procs.get(pid)
        if proc is None:
            proc = self.procs[pid] = Process(pid, self.config, self)
            clock = self._initial.get((pid.partition, pid.site))
            if clock:
                proc.clock.fun_bump(clock)
        return proc

    def _run_process(self, proc: Process, action, *args) -> None:
        try:
            out = action(*args)
        except ProtocolError as exc:
            self.runtime_errors.append(f"t={self.now}: {exc}")
            self.trace("error", src=proc.id, detail=str(exc))
            log.error("protocol error at %s: %s", proc.id, exc)
            return
        for send in out:
            self._dispatch(send)
        self._arm(proc)
        if self.scenario.trace_stable:
            s = proc.stable_timestamp()
            if s != self._last_stable.get(proc.id, 0):
                self._last_stable[proc.id] = s
                self.trace("stable", src=proc.id, partition=proc.id.partition, ts=s)

    def _arm(self, proc: Process) -> None:
        pid = proc.id
        if pid not in self._armed_promises and proc.clock.has_unsent(proc.others):
            self._armed_promises.add(pid)
            self._schedule(self.now + self.config.promise_period, _PROMISE_TICK, pid)
        if pid not in self._armed_liveness and proc.has_work():
            self._armed_liveness.add(pid)
            self._schedule(self.now + self._liveness_period, _LIVENESS_TICK, pid)

    # network

    def _schedule(self, at: float, kind: int, data) -> None:
        heapq.heappush(self._queue, (at, next(self._seq), kind, data))

    def _dropped(self, send: Send, dst: ProcessId) -> bool:
        name = type(send.msg).__name__
        for rule in self.scenario.faults.drops:
            if rule.msg_type != name or rule.src_site != send.src.site:
                continue
            if rule.src_partition is not None and rule.src_partition != send.src.partition:
                continue
            if rule.dst_sites is None or dst.site in rule.dst_sites:
                return True
        return False

    def _dispatch(self, send: Send) -> None:
        msg = send.msg
        if self.scenario.selftest == "property1" and not self._selftest_done and isinstance(msg, MCommit):
            # checker self-test: deliver a commit whose timestamp disagrees with the coordinator's
            self._selftest_done = True
            msg = MCommit(msg.id, msg.partition, msg.ts + 1, msg.path, msg.promises)
            self.trace_send(send.src, send.dsts, msg)
        faults = self.scenario.faults
        for dst in send.dsts:
            if self.crashed(dst) or (faults.drops and self._dropped(send, dst)):
                continue
            delay = self.topology.one_way(send.src.site, dst.site)
            if faults.jitter:
                delay += self.net_rng.uniform(0.0, faults.jitter)
            if faults.reorder_delay and self.now < faults.gst:
                delay += self.net_rng.uniform(0.0, faults.reorder_delay)
            self._schedule(self.now + delay, _DELIVER, (dst, send.src, msg))

    # clients

    def _start_clients(self) -> None:
        w = self.scenario.workload
        if w.mode == "script":
            for k, sc in enumerate(w.script):
                client = Client(index=k, site=sc.site, private_key=k + 1, remaining=1, script_keys=sc.keys)
                self._clients.append(client)
                self._schedule(sc.at, _SUBMIT, client)
            return
        index = 0
        for site in self.placement:
            for _ in range(w.clients_per_site):
                client = Client(index=index, site=site, private_key=index + 1, remaining=w.commands_per_client)
                self._clients.append(client)
                index += 1
                if client.remaining:
                    self._schedule(0.0, _SUBMIT, client)

    def _submit(self, client: Client) -> None:
        keys = client.script_keys or self._keys.keys(client, self.workload_rng)
        accesses: dict[PartitionId, set] = {}
        for key in keys:
            accesses.setdefault(self.scenario.partition_of(key), set()).add(key)
        submitter = ProcessId(self.scenario.partition_of(keys[0]), client.site)
        if self.crashed(submitter):
            client.remaining = 0
            return
        proc = self.process(submitter)
        payload = self.workload_rng.randbytes(self.scenario.workload.payload_size)
        cid = str(CommandId(submitter, proc._next_seq))
        client.outstanding = cid
        client.submitter = str(submitter)
        client.partitions = tuple(sorted(accesses))
        client.submitted_at = self.now
        client.results = {}
        self._client_of[cid] = client
        self._run_process(proc, lambda: proc.submit_command(accesses, payload)[1])

    def _on_commit(self, record: dict) -> None:
        client = self._client_of.get(record["id"])
        if client is not None and record["src"] == client.submitter and client.committed_for != record["id"]:
            client.committed_for = record["id"]
            self.commit_latencies[client.site].append(self.now - client.submitted_at)

    def _on_exec(self, record: dict) -> None:
        client = self._client_of.get(record["id"])
        if client is None:
            return
        pid = ProcessId.parse(record["src"])
        arrival = record["t"] + self.topology.one_way(pid.site, client.site)
        self._schedule(arrival, _RESULT, (client, record["id"], pid.partition))

    def _result(self, client: Client, cid: str, partition: PartitionId) -> None:
        if client.outstanding != cid or partition in client.results:
            return
        client.results[partition] = self.now
        if len(client.results) < len(client.partitions):
            return
        self.trace("return", src=client.submitter, id=cid)
        self.latencies[client.site].append(self.now - client.submitted_at)
        client.outstanding = None
        del self._client_of[cid]
        client.remaining -= 1
        if client.remaining > 0:
            self._schedule(self.now, _SUBMIT, client)

    # faults

    def _crash(self, crash) -> None:
        self._crashed.add((crash.site, crash.partition))
        self.fd.crashed(crash.site, crash.partition, self.now)
        self.trace("crash", site=crash.site, partition=crash.partition)
        self._schedule(self.now + self.fd.delay, _SUSPECT, crash)

    def _suspect(self, crash) -> None:
        for pid in sorted(self.procs):
            if self.crashed(pid):
                continue
            if crash.partition is not None and crash.partition != pid.partition:
                continue
            proc = self.procs[pid]
            self._run_process(proc, proc.on_suspect, ProcessId(pid.partition, crash.site))

    # main loop

    def run(self) -> RunResult:
        s = self.scenario
        self.trace_records.append({
            "t": 0.0, "kind": "meta", "schema": TRACE_SCHEMA, "scenario": s.name, "seed": s.seed,
            "r": self.config.r, "f": self.config.f, "placement": list(self.placement),
            "promise_period": self.config.promise_period,
            "max_crashes": self._max_crashes(),
        })
        for p, site, _ in s.initial_clocks:
            self.process(ProcessId(p, site))
        for crash in s.faults.crashes:
            self._schedule(crash.at, _CRASH, crash)
        self._start_clients()
        queue = self._queue
        while queue and queue[0][0] <= s.horizon:
            at, _, kind, data = heapq.heappop(queue)
            self.now = at
            self.events += 1
            if kind == _DELIVER:
                dst, src, msg = data
                if self.crashed(dst):
                    continue
                proc = self.process(dst)
                self._run_process(proc, proc.handle, src, msg)
            elif kind == _SUBMIT:
                if data.remaining > 0:
                    self._submit(data)
            elif kind == _RESULT:
                self._result(*data)
            elif kind == _PROMISE_TICK:
                self._armed_promises.discard(data)
                if not self.crashed(data):
                    proc = self.procs[data]
                    self._run_process(proc, proc.tick_promises)
            elif kind == _LIVENESS_TICK:
                self._armed_liveness.discard(data)
                if not self.crashed(data):
                    proc = self.procs[data]
                    self._run_process(proc, proc.tick_liveness)
            elif kind == _CRASH:
                self._crash(data)
            elif kind == _SUSPECT:
                self._suspect(data)
        unfinished = sum(1 for c in self._clients if c.remaining > 0 and c.outstanding is not None)
        return RunResult(
            scenario=s, trace=self.trace_records, end_time=self.now, events=self.events,
            latencies=self.latencies, commit_latencies=self.commit_latencies,
            runtime_errors=self.runtime_errors, processes=self.procs, unfinished_clients=unfinished,
        )

    def _max_crashes(self) -> int:
        sites = {c.site for c in self.scenario.faults.crashes}
        per_partition = [c for c in self.scenario.faults.crashes if c.partition is not None]
        if not per_partition:
            return len(sites)
        counts: dict = {}
        for c in self.scenario.faults.crashes:
            key = c.partition
            counts.setdefault(key, set()).add(c.site)
        whole = counts.pop(None, set())
        return max([len(whole | v) for v in counts.values()] + [len(whole)])


def run(scenario: Scenario) -> RunResult:
    """Simulate ``scenario`` deterministically."""
    return Simulation(scenario).run()
