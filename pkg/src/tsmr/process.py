"""A single protocol process: the handler mixins combined over one shared state."""

from __future__ import annotations

from collections import deque
from typing import Callable, Optional, Protocol, Sequence

from .commit import CommitMixin
from .core import Command, CommandId, Config, PartitionId, Phase, ProcessId, closest_replicas, fast_quorums
from .execution import ExecutionMixin
from .kv import KvState
from .messages import (
    MBump, MCommit, MCommitRequest, MConsensus, MConsensusAck, MPayload, MPromises, MPropose,
    MProposeAck, MRec, MRecAck, MRecNAck, MStable, MSubmit, Message, Send,
)
from .recovery import RecoveryMixin
from .state import CommandRecord, PartitionClock, PromiseTable


class Environment(Protocol):
    """What a process needs from the world around it."""

    now: float

    def replicas(self, p: PartitionId) -> Sequence[ProcessId]: ...
    def fast_quorums(self, i: ProcessId, partitions) -> dict: ...
    def covering(self, i: ProcessId, partitions) -> dict: ...
    def leader(self, p: PartitionId, asker: ProcessId) -> ProcessId: ...
    def trace(self, kind: str, **fields) -> None: ...
    def trace_send(self, src: ProcessId, dsts: Sequence[ProcessId], msg: Message) -> None: ...


_HANDLERS: dict[type, str] = {
    MSubmit: "handle_submit",
    MPropose: "handle_propose",
    MPayload: "handle_payload",
    MProposeAck: "handle_propose_ack",
    MCommit: "handle_commit",
    MConsensus: "handle_consensus",
    MConsensusAck: "handle_consensus_ack",
    MBump: "handle_bump",
    MPromises: "handle_promises",
    MStable: "handle_stable",
    MRec: "handle_rec",
    MRecAck: "handle_rec_ack",
    MRecNAck: "handle_rec_nack",
    MCommitRequest: "handle_commit_request",
}


class Process(CommitMixin, ExecutionMixin, RecoveryMixin):
    """Protocol state of one process, driven by :meth:`handle` and the ``tick_*`` methods.

    They return the messages the process wants sent to other processes;
    messages a process addresses to itself are handled inline.
    """

    def __init__(self, pid: ProcessId, config: Config, env: Environment):
        self.id = pid
        self.config = config
        self.env = env
        self.peers: tuple[ProcessId, ...] = tuple(env.replicas(pid.partition))
        if pid not in self.peers:
            raise ValueError(f"{pid} is not a replica of partition {pid.partition}")
        self.rank = self.peers.index(pid) + 1
        self.others = tuple(j for j in self.peers if j != pid)
        self.clock = PartitionClock(pid)
        self.promises = PromiseTable(self.peers)
        self.records: dict[CommandId, CommandRecord] = {}
        self.waiting: dict[CommandId, list] = {}
        self.commit_wanted: dict[CommandId, float] = {}
        self.pending_ids: set[CommandId] = set()
        self.ready: list = []
        self.last_executed: Optional[tuple] = None
        self.executed: list[CommandId] = []
        self.outputs: dict = {}
        self.kv = KvState()
        self._next_seq = 0
        self._local: deque = deque()
        self._outbox: list[Send] = []
        self._busy = False

    # plumbing used by the mixins

    def record(self, cid: CommandId) -> CommandRecord:
        rec = self.records.get(cid)
        if rec is None:
            rec = self.records[cid] = CommandRecord()
        return rec

    def phase(self, cid: CommandId) -> Phase:
        rec = self.records.get(cid)
        return Phase.START if rec is None else rec.phase

    def send(self, dsts: Sequence[ProcessId], msg: Message) -> None:
        self.env.trace_send(self.id, dsts, msg)
        remote = tuple(j for j in dsts if j != self.id)
        if len(remote) != len(dsts):
            self._local.append((self.id, msg))
        if remote:
            self._outbox.append(Send(self.id, remote, msg))

    def command_processes(self, cmd: Command) -> tuple[ProcessId, ...]:
        out: list[ProcessId] = []
        for p in cmd.partitions:
            out.extend(self.env.replicas(p))
        return tuple(out)

    def left_start(self, cid: CommandId, rec: CommandRecord) -> None:
        now = self.env.now
        rec.pending_since = rec.last_action = now
        self.pending_ids.add(cid)
        parked, rec.parked = rec.parked, []
        for src, msg in parked:
            self._local.append((src, msg))
        self.try_commit(cid, rec)

    # entry points

    def handle(self, src: ProcessId, msg: Message) -> list[Send]:
        self._local.append((src, msg))
        return self._drain()

    def submit_command(self, accesses, payload: bytes = b"", write: bool = True) -> tuple[Command, list[Send]]:
        cmd = self.submit(accesses, payload, write)
        return cmd, self._drain()

    def tick_promises(self) -> list[Send]:
        self.broadcast_promises()
        return self._drain()

    def tick_liveness(self) -> list[Send]:
        self.liveness_tick()
        return self._drain()

    def on_suspect(self, j: ProcessId) -> list[Send]:
        """A peer is now believed crashed: resend every promise to the survivors."""
        if j.partition == self.id.partition:
            self.clock.resend_all(k for k in self.peers if k not in (j, self.id))
        return self._drain()

    def has_work(self) -> bool:
        return bool(self.pending_ids or self.commit_wanted or self.ready)

    def _drain(self) -> list[Send]:
        if self._busy:
            return []
        self._busy = True
        try:
            while self._local:
                src, msg = self._local.popleft()
                getattr(self, _HANDLERS[type(msg)])(src, msg)
                if not self._local:
                    self.ingest_own_promises()
                    self.execution_step()
        finally:
            self._busy = False
        out, self._outbox = self._outbox, []
        return out


class StaticEnvironment:
    """Fixed membership, no failures and a settable clock; handy for driving processes by hand."""

    def __init__(self, sites: Sequence[int], partitions: Sequence[PartitionId], rtt: Callable[[int, int], float],
                 config: Config):
        self.sites = tuple(sites)
        self.partitions = tuple(partitions)
        self.config = config
        self.now = 0.0
        self.records: list[dict] = []
        self._rtt = rtt

    def replicas(self, p: PartitionId) -> tuple[ProcessId, ...]:
        return tuple(ProcessId(p, s) for s in self.sites)

    def rtt(self, a: ProcessId, b: ProcessId) -> float:
        return 0.0 if a.site == b.site else self._rtt(a.site, b.site)

    def fast_quorums(self, i: ProcessId, partitions) -> dict:
        return fast_quorums(i, partitions, self.replicas, self.rtt, self.config.fast_quorum_size)

    def covering(self, i: ProcessId, partitions) -> dict:
        return closest_replicas(i, partitions, self.replicas, self.rtt)

    def leader(self, p: PartitionId, asker: Optional[ProcessId] = None) -> ProcessId:
        return self.replicas(p)[0]

    def trace(self, kind: str, **fields) -> None:
        self.records.append({"t": self.now, "kind": kind, **fields})

    def trace_send(self, src: ProcessId, dsts: Sequence[ProcessId], msg: Message) -> None:
        self.records.append({"t": self.now, "kind": "send", "src": src, "dsts": tuple(dsts), "msg": msg})
