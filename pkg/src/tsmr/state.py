"""Per-process protocol state: the clock with its issued promises, known promises, command records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import Command, CommandId, PartitionId, Phase, PHASE_EDGES, ProcessId, Timestamp
from .messages import PromiseBatch, Quorums


class ProtocolError(AssertionError):
    """A runtime invariant of the protocol was broken."""


class PartitionClock:
    """The local ``Clock`` plus the promises it has issued, in issue order.

    Every increase of the clock from ``v`` to ``w`` issues promises for
    exactly ``v+1 .. w``: one attached promise for ``w`` and detached ones
    below it (``fun_ts``), or detached ones only (``fun_bump``).
    """

    def __init__(self, owner: ProcessId):
        self.owner = owner
        self.clock: Timestamp = 0
        # entries: ("d", lo, hi) or ("a", id, ts)
        self.log: list[tuple] = []
        self.attached: dict[CommandId, Timestamp] = {}
        self._cursors: dict[ProcessId, int] = {}

    def fun_ts(self, cid: CommandId, m: Timestamp) -> tuple[Timestamp, PromiseBatch]:
        t = max(m, self.clock + 1)
        detached: tuple = ()
        if self.clock + 1 <= t - 1:
            detached = ((self.clock + 1, t - 1),)
            self.log.append(("d", self.clock + 1, t - 1))
        if cid in self.attached:
            raise ProtocolError(f"{self.owner} attached a second promise to {cid}")
        self.attached[cid] = t
        self.log.append(("a", cid, t))
        self.clock = t
        return t, PromiseBatch(self.owner, detached, ((cid, t),))

    def fun_bump(self, t: Timestamp) -> PromiseBatch:
        t = max(t, self.clock)
        if t == self.clock:
            return PromiseBatch(self.owner)
        lo = self.clock + 1
        self.log.append(("d", lo, t))
        self.clock = t
        return PromiseBatch(self.owner, ((lo, t),))

    def issued(self) -> list[tuple[Timestamp, Optional[CommandId]]]:
        """All issued promises as (ts, attached id or None), sorted by ts."""
        out: list[tuple[Timestamp, Optional[CommandId]]] = []
        for entry in self.log:
            if entry[0] == "d":
                out.extend((u, None) for u in range(entry[1], entry[2] + 1))
            else:
                out.append((entry[2], entry[1]))
        out.sort(key=lambda item: item[0])
        return out

    def has_unsent(self, peers: Iterable[ProcessId]) -> bool:
        n = len(self.log)
        return any(self._cursors.get(j, 0) < n for j in peers)

    def delta(self, peers: Iterable[ProcessId]) -> list[tuple[tuple[ProcessId, ...], PromiseBatch]]:
        """Batches of not-yet-sent promises, grouped by peers sharing a cursor."""
        groups: dict[int, list[ProcessId]] = {}
        n = len(self.log)
        for j in peers:
            cursor = self._cursors.get(j, 0)
            if cursor < n:
                groups.setdefault(cursor, []).append(j)
            self._cursors[j] = n
        out = []
        for cursor, dsts in sorted(groups.items()):
            out.append((tuple(dsts), self._batch(self.log[cursor:])))
        return out

    def resend_all(self, peers: Iterable[ProcessId]) -> None:
        for j in peers:
            self._cursors[j] = 0

    def _batch(self, entries: list[tuple]) -> PromiseBatch:
        detached = tuple((e[1], e[2]) for e in entries if e[0] == "d")
        attached = tuple((e[1], e[2]) for e in entries if e[0] == "a")
        return PromiseBatch(self.owner, detached, attached)


class PromiseTable:
    """Known promises (the ``Promises`` set) of the processes of one partition.

    Stored as a contiguous prefix per peer plus the out-of-order rest, which
    keeps the set exact while making the highest contiguous promise O(1).
    """

    def __init__(self, peers: Iterable[ProcessId]):
        self.frontier: dict[ProcessId, Timestamp] = {j: 0 for j in peers}
        self.extra: dict[ProcessId, set[Timestamp]] = {j: set() for j in self.frontier}

    def add(self, j: ProcessId, u: Timestamp) -> None:
        self.add_range(j, u, u)

    def add_range(self, j: ProcessId, lo: Timestamp, hi: Timestamp) -> None:
        if j not in self.frontier or hi < lo:
            return
        front = self.frontier[j]
        if hi <= front:
            return
        extra = self.extra[j]
        if lo <= front + 1:
            front = hi
            while front + 1 in extra:
                front += 1
            if extra:
                self.extra[j] = {u for u in extra if u > front}
            self.frontier[j] = front
        else:
            extra.update(range(lo, hi + 1))

    def contains(self, j: ProcessId, u: Timestamp) -> bool:
        return 1 <= u <= self.frontier.get(j, 0) or u in self.extra.get(j, ())

    def known(self, j: ProcessId) -> set[Timestamp]:
        return set(range(1, self.frontier[j] + 1)) | self.extra[j]

    def hcv(self, j: ProcessId) -> Timestamp:
        return self.frontier.get(j, 0)


@dataclass
class CommandRecord:
    cmd: Optional[Command] = None
    ts: Timestamp = 0
    phase: Phase = Phase.START
    quorums: Optional[Quorums] = None
    bal: int = 0
    abal: int = 0

    # coordinator bookkeeping
    proposals: dict[ProcessId, Timestamp] = field(default_factory=dict)
    ack_promises: list[PromiseBatch] = field(default_factory=list)
    decided: bool = False
    consensus_acks: dict[int, set[ProcessId]] = field(default_factory=dict)
    committed_ballots: set[int] = field(default_factory=set)
    proposed_ballots: dict[int, Timestamp] = field(default_factory=dict)
    rec_acks: dict[int, dict[ProcessId, tuple]] = field(default_factory=dict)
    nack_floor: int = 0

    commits: dict[PartitionId, Timestamp] = field(default_factory=dict)
    stable_from: set[PartitionId] = field(default_factory=set)
    stable_sent_at: Optional[float] = None
    parked: list[tuple[ProcessId, object]] = field(default_factory=list)

    # liveness timers
    pending_since: Optional[float] = None
    last_action: Optional[float] = None
    commit_request_at: Optional[float] = None

    def move(self, phase: Phase) -> None:
        if phase not in PHASE_EDGES[self.phase]:
            raise ProtocolError(f"illegal phase transition {self.phase.value} -> {phase.value}")
        self.phase = phase

    @property
    def pending(self) -> bool:
        return self.phase.pending

    @property
    def committed(self) -> bool:
        return self.phase.committed
