"""Protocol message vocabulary.

Messages are immutable; a handler never mutates one it receives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .core import Command, CommandId, PartitionId, Phase, ProcessId, Timestamp

Quorums = Mapping[PartitionId, tuple[ProcessId, ...]]
Range = tuple[Timestamp, Timestamp]


@dataclass(frozen=True)
class PromiseBatch:
    """Promises issued by one process: inclusive detached ranges plus (id, ts) attached pairs."""

    process: ProcessId
    detached: tuple[Range, ...] = ()
    attached: tuple[tuple[CommandId, Timestamp], ...] = ()

    def __bool__(self) -> bool:
        return bool(self.detached or self.attached)


@dataclass(frozen=True)
class MSubmit:
    id: CommandId
    cmd: Command
    quorums: Quorums


@dataclass(frozen=True)
class MPropose:
    id: CommandId
    cmd: Command
    quorums: Quorums
    ts: Timestamp


@dataclass(frozen=True)
class MPayload:
    id: CommandId
    cmd: Command
    quorums: Quorums


@dataclass(frozen=True)
class MProposeAck:
    id: CommandId
    ts: Timestamp
    promises: Optional[PromiseBatch] = None


@dataclass(frozen=True)
class MCommit:
    id: CommandId
    partition: PartitionId
    ts: Timestamp
    # fast | slow | request; informational, used by run monitors
    path: str = "fast"
    promises: tuple[PromiseBatch, ...] = ()


@dataclass(frozen=True)
class MConsensus:
    id: CommandId
    partition: PartitionId
    ts: Timestamp
    ballot: int


@dataclass(frozen=True)
class MConsensusAck:
    id: CommandId
    ballot: int


@dataclass(frozen=True)
class MBump:
    id: CommandId
    ts: Timestamp


@dataclass(frozen=True)
class MPromises:
    batch: PromiseBatch


@dataclass(frozen=True)
class MStable:
    id: CommandId


@dataclass(frozen=True)
class MRec:
    id: CommandId
    ballot: int


@dataclass(frozen=True)
class MRecAck:
    id: CommandId
    ts: Timestamp
    phase: Phase
    abal: int
    ballot: int


@dataclass(frozen=True)
class MRecNAck:
    id: CommandId
    ballot: int


@dataclass(frozen=True)
class MCommitRequest:
    id: CommandId


Message = Union[
    MSubmit, MPropose, MPayload, MProposeAck, MCommit, MConsensus, MConsensusAck,
    MBump, MPromises, MStable, MRec, MRecAck, MRecNAck, MCommitRequest,
]


@dataclass
class Send:
    """An outbound message and its destinations."""

    src: ProcessId
    dsts: tuple[ProcessId, ...]
    msg: Message
    extra: dict = field(default_factory=dict)


def describe(msg: Message) -> dict:
    """Flat, JSON-friendly summary of a message for trace records."""
    out: dict = {"type": type(msg).__name__}
    cid = getattr(msg, "id", None)
    if cid is not None:
        out["id"] = str(cid)
    for name in ("ts", "ballot", "abal", "partition", "path"):
        value = getattr(msg, name, None)
        if value is not None:
            out[name] = value
    if isinstance(msg, MRecAck):
        out["phase"] = msg.phase.value
    return out
