"""Promise dissemination and execution in stable timestamp order."""

from __future__ import annotations

import heapq
from typing import Iterable

from .core import CommandId, Phase, ProcessId, Timestamp
from .messages import MPromises, MStable, PromiseBatch
from .state import PromiseTable, ProtocolError


def highest_contiguous_promise(known: Iterable[Timestamp]) -> Timestamp:
    """Largest ``c`` such that every timestamp ``1..c`` is in ``known``."""
    have = set(known)
    c = 0
    while c + 1 in have:
        c += 1
    return c


def stable_timestamp(hcvs: Iterable[Timestamp], r: int) -> Timestamp:
    """The ``(r//2 + 1)``-th smallest highest contiguous promise.

    Every timestamp up to the result has been promised by a majority, so no
    command can still commit with a timestamp at or below it.
    """
    ordered = sorted(hcvs)
    if len(ordered) != r:
        raise ValueError(f"expected {r} peers, got {len(ordered)}")
    return ordered[r // 2]


class ExecutionMixin:
    """Execution-side handlers of a :class:`~tsmr.process.Process`."""

    promises: PromiseTable

    def stable_timestamp(self) -> Timestamp:
        table = self.promises
        return stable_timestamp((table.hcv(j) for j in self.peers), self.config.r)

    def broadcast_promises(self) -> None:
        for dsts, batch in self.clock.delta(self.others):
            self.send(dsts, MPromises(batch))

    def ingest_own_promises(self) -> None:
        for _, batch in self.clock.delta((self.id,)):
            self.ingest(batch)

    def handle_promises(self, src: ProcessId, m: MPromises) -> None:
        self.ingest(m.batch)

    def ingest(self, batch: PromiseBatch, request_missing: bool = True) -> None:
        j = batch.process
        if j.partition != self.id.partition:
            return
        for lo, hi in batch.detached:
            self.promises.add_range(j, lo, hi)
        for cid, t in batch.attached:
            rec = self.records.get(cid)
            if rec is not None and rec.committed:
                self.promises.add(j, t)
                continue
            self.waiting.setdefault(cid, []).append((j, t))
            if request_missing:
                self.commit_wanted.setdefault(cid, self.env.now)

    def committed_now(self, cid: CommandId, rec) -> None:
        for j, t in self.waiting.pop(cid, ()):
            self.promises.add(j, t)
        self.commit_wanted.pop(cid, None)
        self.pending_ids.discard(cid)
        heapq.heappush(self.ready, (rec.ts, cid))

    def handle_stable(self, src: ProcessId, m: MStable) -> None:
        self.record(m.id).stable_from.add(src.partition)

    def execution_step(self) -> None:
        if not self.ready:
            return
        stable = self.stable_timestamp()
        while self.ready and self.ready[0][0] <= stable:
            ts, cid = self.ready[0]
            rec = self.records[cid]
            if len(rec.cmd.partitions) > 1:
                if rec.stable_sent_at is None:
                    rec.stable_sent_at = self.env.now
                    rec.stable_from.add(self.id.partition)
                    self.send(self.stable_witnesses(rec.cmd), MStable(cid))
                if any(p not in rec.stable_from for p in rec.cmd.partitions):
                    return
            heapq.heappop(self.ready)
            self.execute(cid, rec)

    def stable_witnesses(self, cmd) -> tuple[ProcessId, ...]:
        return tuple(j for j in self.command_processes(cmd) if j.partition != self.id.partition)

    def execute(self, cid: CommandId, rec) -> None:
        key = (rec.ts, cid)
        if self.last_executed is not None and key <= self.last_executed:
            raise ProtocolError(f"{self.id} executed {cid} at {key} after {self.last_executed}")
        self.last_executed = key
        self.outputs[cid] = self.kv.apply(rec.cmd, self.id.partition)
        rec.move(Phase.EXECUTE)
        self.executed.append(cid)
        self.env.trace("exec", src=self.id, id=cid, partition=self.id.partition, ts=rec.ts)
