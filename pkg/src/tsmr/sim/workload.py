"""Closed-loop clients and the key choice of each command they issue."""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import dataclass, field
from typing import Optional

from ..core import ConfigError

HOT_KEY = 0


@dataclass(frozen=True)
class ScriptedCommand:
    at: float
    site: int
    keys: tuple[int, ...]


@dataclass(frozen=True)
class Workload:
    """How many clients there are and which keys their commands touch.

    ``mode`` is ``conflict`` (hot key 0 with probability ``conflict_rate``,
    otherwise a key private to the client), ``zipf`` (keys drawn from a Zipf
    distribution over ``keyspace``) or ``script`` (explicit arrivals).
    """

    mode: str = "conflict"
    clients_per_site: int = 1
    commands_per_client: int = 1
    conflict_rate: float = 0.02
    zipf_exponent: float = 0.7
    keyspace: int = 1000
    keys_per_command: int = 1
    payload_size: int = 8
    script: tuple[ScriptedCommand, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in ("conflict", "zipf", "script"):
            raise ConfigError(f"unknown workload mode {self.mode!r}")
        if not 0.0 <= self.conflict_rate <= 1.0:
            raise ConfigError("conflict_rate must be within [0, 1]")
        if self.keys_per_command not in (1, 2):
            raise ConfigError("keys_per_command must be 1 or 2")
        if self.mode == "zipf" and self.keyspace < 2:
            raise ConfigError("zipf mode needs at least two keys")
        if self.clients_per_site < 0 or self.commands_per_client < 0 or self.payload_size < 0:
            raise ConfigError("workload counts must be non-negative")


@dataclass
class Client:
    index: int
    site: int
    private_key: int
    remaining: int
    script_keys: tuple[int, ...] = ()
    outstanding: Optional[str] = None
    submitter: str = ""
    partitions: tuple[int, ...] = ()
    submitted_at: float = 0.0
    committed_for: Optional[str] = None
    results: dict = field(default_factory=dict)


class ZipfSampler:
    """Sampler over ``1..n`` with probability proportional to ``rank ** -s``."""

    def __init__(self, n: int, s: float):
        weights = [k ** -s for k in range(1, n + 1)]
        self._cum = list(itertools.accumulate(weights))
        self.n = n

    def sample(self, rng: random.Random) -> int:
        u = rng.random() * self._cum[-1]
        return min(bisect.bisect_left(self._cum, u), self.n - 1) + 1


class KeyChooser:
    def __init__(self, workload: Workload):
        self.workload = workload
        self._zipf = ZipfSampler(workload.keyspace, workload.zipf_exponent) if workload.mode == "zipf" else None

    def keys(self, client: Client, rng: random.Random) -> tuple[int, ...]:
        """Keys accessed by the next command of ``client``."""
        w = self.workload
        if w.mode == "zipf":
            first = self._zipf.sample(rng)
            if w.keys_per_command == 1:
                return (first,)
            second = first
            while second == first:
                second = self._zipf.sample(rng)
            return (first, second)
        first = HOT_KEY if rng.random() < w.conflict_rate else client.private_key
        if w.keys_per_command == 1:
            return (first,)
        second = rng.randint(1, max(w.keyspace, 2))
        return (first, second) if second != first else (first,)


def generate_keys(workload: Workload, client: Client, rng: random.Random) -> tuple[int, ...]:
    return KeyChooser(workload).keys(client, rng)
