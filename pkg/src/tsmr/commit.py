"""Commit protocol: timestamp proposals, the fast-path rule and the Flexible Paxos slow path."""

from __future__ import annotations

from typing import Mapping

from .core import Command, CommandId, NotAReplica, Phase, ProcessId, Timestamp
from .messages import (
    MBump, MCommit, MConsensus, MConsensusAck, MPayload, MPropose, MProposeAck, MRecNAck, MSubmit,
)
from .state import ProtocolError


def fast_path_decision(proposals: Mapping[ProcessId, Timestamp], f: int) -> tuple[Timestamp, bool]:
    """Highest proposal and whether at least ``f`` processes proposed it."""
    t = max(proposals.values())
    return t, sum(1 for u in proposals.values() if u == t) >= f


class CommitMixin:
    """Commit handlers of a :class:`~tsmr.process.Process`."""

    def submit(self, accesses: Mapping, payload: bytes = b"", write: bool = True) -> Command:
        if self.id.partition not in accesses:
            raise NotAReplica(f"{self.id} does not replicate any partition accessed by the command")
        cid = CommandId(self.id, self._next_seq)
        self._next_seq += 1
        cmd = Command(cid, {p: frozenset(keys) for p, keys in accesses.items()}, payload, write)
        qs = self.env.fast_quorums(self.id, cmd.partitions)
        coordinators = tuple(qs[p][0] for p in cmd.partitions)
        self.env.trace("submit", src=self.id, id=cid, partitions=list(cmd.partitions))
        self.send(coordinators, MSubmit(cid, cmd, qs))
        return cmd

    def handle_submit(self, src: ProcessId, m: MSubmit) -> None:
        quorum = m.quorums[self.id.partition]
        t = self.clock.clock + 1
        self.send(quorum, MPropose(m.id, m.cmd, m.quorums, t))
        others = tuple(j for j in self.peers if j not in quorum)
        if others:
            self.send(others, MPayload(m.id, m.cmd, m.quorums))

    def handle_payload(self, src: ProcessId, m: MPayload) -> None:
        rec = self.record(m.id)
        if rec.phase is not Phase.START:
            return
        rec.cmd, rec.quorums = m.cmd, m.quorums
        rec.move(Phase.PAYLOAD)
        self.left_start(m.id, rec)

    def handle_propose(self, src: ProcessId, m: MPropose) -> None:
        rec = self.record(m.id)
        if rec.phase is not Phase.START:
            return
        rec.cmd, rec.quorums = m.cmd, m.quorums
        rec.move(Phase.PROPOSE)
        rec.ts, batch = self.clock.fun_ts(m.id, m.ts)
        self.env.trace("fun_ts", src=self.id, id=m.id, partition=self.id.partition, ts=rec.ts)
        self.send((src,), MProposeAck(m.id, rec.ts, batch if self.config.piggyback_promises else None))
        if self.config.mbump and len(m.cmd.partitions) > 1:
            nearby = self.env.covering(self.id, [q for q in m.cmd.partitions if q != self.id.partition])
            self.send(tuple(nearby.values()), MBump(m.id, rec.ts))
        self.left_start(m.id, rec)

    def handle_propose_ack(self, src: ProcessId, m: MProposeAck) -> None:
        rec = self.record(m.id)
        if rec.phase is not Phase.PROPOSE or rec.decided:
            return
        rec.proposals[src] = m.ts
        if m.promises:
            rec.ack_promises.append(m.promises)
        quorum = rec.quorums[self.id.partition]
        if any(j not in rec.proposals for j in quorum):
            return
        rec.decided = True
        proposals = {j: rec.proposals[j] for j in quorum}
        t, fast = fast_path_decision(proposals, self.config.f)
        self.env.trace(
            "decision", src=self.id, id=m.id, partition=self.id.partition, ts=t,
            path="fast" if fast else "slow",
            proposals={str(j): u for j, u in proposals.items()}, coordinator=str(quorum[0]),
        )
        if fast:
            self.send(self.command_processes(rec.cmd), MCommit(
                m.id, self.id.partition, t, "fast", tuple(rec.ack_promises)))
        else:
            self.propose_consensus(m.id, rec, t, self.rank)

    def propose_consensus(self, cid: CommandId, rec, t: Timestamp, ballot: int) -> None:
        previous = rec.proposed_ballots.setdefault(ballot, t)
        if previous != t:
            raise ProtocolError(f"two consensus proposals for {cid} at ballot {ballot}")
        self.send(self.peers, MConsensus(cid, self.id.partition, t, ballot))

    def handle_commit(self, src: ProcessId, m: MCommit) -> None:
        rec = self.record(m.id)
        rec.commits.setdefault(m.partition, m.ts)
        self.try_commit(m.id, rec)
        for batch in m.promises:
            if batch.process.partition == self.id.partition:
                self.ingest(batch, request_missing=False)

    def try_commit(self, cid: CommandId, rec) -> None:
        if not rec.pending or any(p not in rec.commits for p in rec.cmd.partitions):
            return
        mine = rec.commits[self.id.partition]
        final = max(rec.commits[p] for p in rec.cmd.partitions)
        self.env.trace(
            "commit", src=self.id, id=cid, partition=self.id.partition, ts=final,
            partition_ts=mine, stable_before=self.stable_timestamp(),
        )
        rec.ts = final
        rec.move(Phase.COMMIT)
        self.clock.fun_bump(final)
        self.committed_now(cid, rec)

    def handle_consensus(self, src: ProcessId, m: MConsensus) -> None:
        rec = self.record(m.id)
        if rec.phase is Phase.START:
            rec.parked.append((src, m))
            return
        if rec.bal > m.ballot:
            self.send((src,), MRecNAck(m.id, rec.bal))
            return
        if not rec.committed:
            rec.ts = m.ts
        rec.bal = rec.abal = m.ballot
        self.clock.fun_bump(m.ts)
        self.send((src,), MConsensusAck(m.id, m.ballot))

    def handle_consensus_ack(self, src: ProcessId, m: MConsensusAck) -> None:
        rec = self.record(m.id)
        if rec.bal != m.ballot or m.ballot not in rec.proposed_ballots:
            return
        acks = rec.consensus_acks.setdefault(m.ballot, set())
        acks.add(src)
        if len(acks) < self.config.slow_quorum_size or m.ballot in rec.committed_ballots:
            return
        rec.committed_ballots.add(m.ballot)
        promises = tuple(rec.ack_promises) if rec.ack_promises else ()
        self.send(self.command_processes(rec.cmd), MCommit(
            m.id, self.id.partition, rec.proposed_ballots[m.ballot], "slow", promises))

    def handle_bump(self, src: ProcessId, m: MBump) -> None:
        rec = self.record(m.id)
        if rec.phase is Phase.START:
            rec.parked.append((src, m))
        elif rec.phase is Phase.PROPOSE:
            self.clock.fun_bump(m.ts)
