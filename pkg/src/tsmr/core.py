"""Identifiers, commands, phases and quorum selection shared by the protocol."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Collection, Iterable, Mapping, MutableMapping, Optional, Sequence

PartitionId = int
Timestamp = int


class ConfigError(ValueError):
    pass


class InsufficientReplicas(RuntimeError):
    pass


class NotAReplica(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ProcessId:
    """A process replicating exactly one partition, located at one site."""

    partition: PartitionId
    site: int

    def __str__(self) -> str:
        return f"{self.partition}:{self.site}"

    @classmethod
    def parse(cls, text: str) -> ProcessId:
        partition, site = text.split(":")
        return cls(int(partition), int(site))


@dataclass(frozen=True, order=True)
class CommandId:
    submitter: ProcessId
    seq: int

    def __str__(self) -> str:
        return f"{self.submitter}/{self.seq}"

    @classmethod
    def parse(cls, text: str) -> CommandId:
        submitter, seq = text.split("/")
        return cls(ProcessId.parse(submitter), int(seq))


@dataclass(frozen=True)
class Command:
    id: CommandId
    accesses: Mapping[PartitionId, frozenset]
    payload: bytes = b""
    write: bool = True

    def __post_init__(self) -> None:
        if not self.accesses:
            raise ValueError("a command must access at least one partition")

    @property
    def partitions(self) -> tuple[PartitionId, ...]:
        return tuple(sorted(self.accesses))

    def keys(self, partition: PartitionId) -> frozenset:
        return self.accesses.get(partition, frozenset())


class Phase(enum.Enum):
    START = "START"
    PAYLOAD = "PAYLOAD"
    PROPOSE = "PROPOSE"
    RECOVER_R = "RECOVER-R"
    RECOVER_P = "RECOVER-P"
    COMMIT = "COMMIT"
    EXECUTE = "EXECUTE"

    @property
    def pending(self) -> bool:
        return self in _PENDING

    @property
    def committed(self) -> bool:
        return self in (Phase.COMMIT, Phase.EXECUTE)


_PENDING = frozenset({Phase.PAYLOAD, Phase.PROPOSE, Phase.RECOVER_R, Phase.RECOVER_P})

PHASE_EDGES: dict[Phase, frozenset[Phase]] = {
    Phase.START: frozenset({Phase.PAYLOAD, Phase.PROPOSE}),
    Phase.PAYLOAD: frozenset({Phase.RECOVER_R, Phase.COMMIT}),
    Phase.PROPOSE: frozenset({Phase.RECOVER_P, Phase.COMMIT}),
    Phase.RECOVER_R: frozenset({Phase.COMMIT}),
    Phase.RECOVER_P: frozenset({Phase.COMMIT}),
    Phase.COMMIT: frozenset({Phase.EXECUTE}),
    Phase.EXECUTE: frozenset(),
}


@dataclass(frozen=True)
class Promise:
    """``process`` will never propose ``ts`` again; ``attached`` names the command it was proposed for."""

    process: ProcessId
    ts: Timestamp
    attached: Optional[CommandId] = None


@dataclass(frozen=True)
class Config:
    r: int
    f: int
    # None means every key is its own partition
    partitions: Optional[int] = 1
    piggyback_promises: bool = True
    mbump: bool = True
    promise_period: float = 5.0
    recovery_timeout: float = 1000.0
    fd_period: float = 10.0

    def __post_init__(self) -> None:
        if self.r < 3:
            raise ConfigError(f"r must be at least 3, got {self.r}")
        if not 1 <= self.f <= (self.r - 1) // 2:
            raise ConfigError(f"f must satisfy 1 <= f <= floor((r-1)/2); got r={self.r} f={self.f}")
        if self.partitions is not None and self.partitions < 1:
            raise ConfigError("partitions must be positive")
        if self.promise_period <= 0 or self.recovery_timeout <= 0 or self.fd_period <= 0:
            raise ConfigError("periods and timeouts must be positive")

    @property
    def fast_quorum_size(self) -> int:
        return self.r // 2 + self.f

    @property
    def slow_quorum_size(self) -> int:
        return self.f + 1

    @property
    def recovery_quorum_size(self) -> int:
        return self.r - self.f

    @property
    def majority(self) -> int:
        return self.r // 2 + 1


def next_id(submitter: ProcessId, counters: MutableMapping[ProcessId, int]) -> CommandId:
    seq = counters.get(submitter, 0)
    counters[submitter] = seq + 1
    return CommandId(submitter, seq)


def id_order(a: CommandId, b: CommandId) -> int:
    """Three-way comparison: -1, 0 or 1."""
    return (a > b) - (a < b)


def execution_key(ts: Timestamp, cid: CommandId) -> tuple[Timestamp, CommandId]:
    return (ts, cid)


def fast_quorums(
    i: ProcessId,
    partitions: Iterable[PartitionId],
    replicas: Callable[[PartitionId], Sequence[ProcessId]],
    rtt: Callable[[ProcessId, ProcessId], float],
    size: int,
    suspected: Collection[ProcessId] = (),
) -> dict[PartitionId, tuple[ProcessId, ...]]:
    """Pick one fast quorum per accessed partition, coordinator first.

    The coordinator of a partition is its replica closest to ``i``; the
    rest of the quorum are the replicas closest to that coordinator.
    Processes believed alive are preferred, but suspected ones fill the
    quorum when too few remain.
    """
    quorums: dict[PartitionId, tuple[ProcessId, ...]] = {}
    for p in sorted(partitions):
        members = list(replicas(p))
        if len(members) < size:
            raise InsufficientReplicas(f"partition {p} has {len(members)} replicas, need {size}")

        def closeness(origin: ProcessId) -> Callable[[ProcessId], tuple]:
            return lambda j: (j in suspected, rtt(origin, j), j)

        coordinator = min(members, key=closeness(i))
        rest = sorted((j for j in members if j != coordinator), key=closeness(coordinator))
        quorums[p] = (coordinator, *rest[: size - 1])
    return quorums


def closest_replicas(
    i: ProcessId,
    partitions: Iterable[PartitionId],
    replicas: Callable[[PartitionId], Sequence[ProcessId]],
    rtt: Callable[[ProcessId, ProcessId], float],
    suspected: Collection[ProcessId] = (),
) -> dict[PartitionId, ProcessId]:
    """One believed-alive replica per partition, as close to ``i`` as possible."""
    return {
        p: min(replicas(p), key=lambda j: (j in suspected, rtt(i, j), j))
        for p in sorted(partitions)
    }

