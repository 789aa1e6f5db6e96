"""Coordinator takeover with its ballot arithmetic, plus the periodic liveness timers."""

from __future__ import annotations

from .core import CommandId, Phase, ProcessId
from .messages import MCommit, MCommitRequest, MPayload, MRec, MRecAck, MRecNAck, MStable

ACCEPTED_MAX = "accepted-max"
S_TRUE = "s-true"
S_FALSE = "s-false"


def bal_leader(b: int, r: int) -> int:
    """Rank (1..r) of the process owning ballot ``b >= 1``."""
    if b < 1:
        raise ValueError("ballot 0 has no owner")
    return b - r * ((b - 1) // r)


def recover_ballot(rank: int, bal: int, r: int) -> int:
    """Smallest ballot owned by ``rank`` in the round after the one holding ``bal``.

    Python's ``//`` floors toward negative infinity, so ``bal == 0`` yields ``rank``.
    """
    return rank + r * ((bal - 1) // r + 1)


def takeover_ballot(rank: int, bal: int, r: int) -> int:
    """Ballot a recoverer uses: like :func:`recover_ballot` but never inside ``1..r``.

    Ballots ``1..r`` belong to the initial coordinators' slow paths. A recovery
    there could be overtaken by a higher-ranked coordinator's unrecovered
    slow-path ballot, which skips the read phase.
    """
    return recover_ballot(rank, max(bal, 1), r)


def choose_recovery_timestamp(acks: dict, fast_quorum: tuple) -> tuple[int, str]:
    """Timestamp a recoverer proposes given ``acks[j] = (ts, phase, abal)`` from r-f processes.

    Returns the timestamp and the name of the branch that produced it.
    """
    accepted = [(ab, t) for t, _, ab in acks.values() if ab != 0]
    if accepted:
        return max(accepted)[1], ACCEPTED_MAX
    intersection = [j for j in fast_quorum if j in acks]
    s = fast_quorum[0] in acks or any(acks[j][1] is Phase.RECOVER_R for j in intersection)
    if s:
        return max(t for t, _, _ in acks.values()), S_TRUE
    return max(acks[j][0] for j in intersection), S_FALSE


class RecoveryMixin:
    """Recovery handlers of a :class:`~tsmr.process.Process`."""

    def recover(self, cid: CommandId, rec) -> None:
        b = takeover_ballot(self.rank, max(rec.bal, rec.nack_floor), self.config.r)
        self.env.trace("mrec", src=self.id, id=cid, partition=self.id.partition, ballot=b)
        self.send(self.peers, MRec(cid, b))

    def handle_rec(self, src: ProcessId, m: MRec) -> None:
        rec = self.record(m.id)
        if rec.phase is Phase.START:
            rec.parked.append((src, m))
            return
        if rec.bal > m.ballot or (rec.bal == m.ballot and src != self.id):
            self.send((src,), MRecNAck(m.id, rec.bal))
            return
        if not rec.pending:
            return
        known = rec.commits.get(self.id.partition)
        if known is not None:
            # the partition's timestamp is decided even if the command still waits on
            # other partitions; answering as a live proposer could let recovery pick another
            self.send((src,), MCommit(m.id, self.id.partition, known, "request"))
            return
        if rec.bal == 0:
            if rec.phase is Phase.PAYLOAD:
                rec.ts, _ = self.clock.fun_ts(m.id, 0)
                self.env.trace("fun_ts", src=self.id, id=m.id, partition=self.id.partition, ts=rec.ts)
                rec.move(Phase.RECOVER_R)
            elif rec.phase is Phase.PROPOSE:
                rec.move(Phase.RECOVER_P)
        rec.bal = m.ballot
        self.send((src,), MRecAck(m.id, rec.ts, rec.phase, rec.abal, m.ballot))

    def handle_rec_ack(self, src: ProcessId, m: MRecAck) -> None:
        rec = self.record(m.id)
        if not rec.pending or rec.bal != m.ballot or m.ballot in rec.proposed_ballots:
            return
        if bal_leader(m.ballot, self.config.r) != self.rank:
            return
        acks = rec.rec_acks.setdefault(m.ballot, {})
        acks[src] = (m.ts, m.phase, m.abal)
        if len(acks) < self.config.recovery_quorum_size:
            return
        t, branch = choose_recovery_timestamp(acks, rec.quorums[self.id.partition])
        self.env.trace(
            "recovery", src=self.id, id=m.id, partition=self.id.partition, ballot=m.ballot,
            branch=branch, ts=t, acks={str(j): [a[0], a[1].value, a[2]] for j, a in sorted(acks.items())},
        )
        self.propose_consensus(m.id, rec, t, m.ballot)

    def handle_rec_nack(self, src: ProcessId, m: MRecNAck) -> None:
        rec = self.record(m.id)
        if not rec.pending or self.env.leader(self.id.partition, self.id) != self.id:
            return
        if m.ballot <= max(rec.bal, rec.nack_floor):
            return
        rec.nack_floor = m.ballot
        self.recover(m.id, rec)

    def handle_commit_request(self, src: ProcessId, m: MCommitRequest) -> None:
        rec = self.records.get(m.id)
        if rec is None or not rec.committed:
            return
        self.send((src,), MPayload(m.id, rec.cmd, rec.quorums))
        for p, t in sorted(rec.commits.items()):
            self.send((src,), MCommit(m.id, p, t, "request"))

    def liveness_tick(self) -> None:
        now = self.env.now
        timeout = self.config.recovery_timeout
        leader = self.env.leader(self.id.partition, self.id) == self.id
        for cid in sorted(self.pending_ids):
            rec = self.records[cid]
            if now - rec.last_action < timeout:
                continue
            rec.last_action = now
            others = tuple(j for j in self.command_processes(rec.cmd) if j != self.id)
            self.send(others, MPayload(cid, rec.cmd, rec.quorums))
            if leader and (rec.bal == 0 or bal_leader(rec.bal, self.config.r) != self.rank):
                self.recover(cid, rec)
            self.commit_wanted.setdefault(cid, rec.pending_since)
        for cid in sorted(self.commit_wanted):
            first = self.commit_wanted[cid]
            rec = self.records.get(cid)
            if now - first < timeout:
                continue
            if rec is not None and rec.commit_request_at is not None and now - rec.commit_request_at < timeout:
                continue
            rec = self.record(cid)
            rec.commit_request_at = now
            if rec.cmd is not None:
                dsts = tuple(j for j in self.command_processes(rec.cmd) if j != self.id)
            else:
                dsts = tuple(j for j in self.peers if j != self.id)
            self.send(dsts, MCommitRequest(cid))
        front = self.ready[0][1] if self.ready else None
        if front is not None:
            rec = self.records[front]
            if rec.stable_sent_at is not None and now - rec.stable_sent_at >= timeout and \
                    any(p not in rec.stable_from for p in rec.cmd.partitions):
                rec.stable_sent_at = now
                self.send(self.stable_witnesses(rec.cmd), MStable(front))
