"""Simulated failure detectors: leader election per partition and crash suspicion."""

from __future__ import annotations

import random
from typing import Optional, Sequence

from ..core import PartitionId, ProcessId

# A crash is noticed after this many missed detection periods.
MISSED_PERIODS = 3


class FailureDetector:
    """Suspicion is driven by the simulator's knowledge of crash times.

    A process is suspected ``MISSED_PERIODS * period`` after it crashes and
    never before. The leader of a partition is its lowest-ranked replica
    not suspected; with ``flaky`` set, each asker instead sees an arbitrary
    replica until ``gst``, so several processes may act as leader at once.
    """

    def __init__(self, placement: Sequence[int], period: float, gst: float = 0.0,
                 flaky: bool = False, seed: int = 0):
        self.placement = tuple(placement)
        self.delay = MISSED_PERIODS * period
        self.period = period
        self.gst = gst
        self.flaky = flaky
        self.seed = seed
        self.crash_time: dict[tuple[int, Optional[int]], float] = {}

    def crashed(self, site: int, partition: Optional[int], at: float) -> None:
        key = (site, partition)
        self.crash_time[key] = min(at, self.crash_time.get(key, at))

    def crashed_at(self, pid: ProcessId) -> Optional[float]:
        times = [t for key, t in self.crash_time.items()
                 if key[0] == pid.site and key[1] in (None, pid.partition)]
        return min(times) if times else None

    def suspects(self, pid: ProcessId, now: float) -> bool:
        t = self.crashed_at(pid)
        return t is not None and now >= t + self.delay

    def suspected(self, members: Sequence[ProcessId], now: float) -> frozenset:
        return frozenset(j for j in members if self.suspects(j, now))

    def leader(self, p: PartitionId, asker: ProcessId, now: float) -> ProcessId:
        members = [ProcessId(p, s) for s in self.placement]
        alive = [j for j in members if not self.suspects(j, now)] or members
        if self.flaky and now < self.gst:
            epoch = int(now // self.period)
            rng = random.Random(f"{self.seed}:{p}:{asker.site}:{epoch}")
            return rng.choice(alive)
        return alive[0]
