"""Scenario description: topology, protocol configuration, workload and faults."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..core import Config, ConfigError
from .topology import Topology, five_regions
from .workload import ScriptedCommand, Workload


@dataclass(frozen=True)
class Crash:
    """Crash of the process of ``partition`` at ``site``, or of every process there when ``partition`` is None."""

    at: float
    site: int
    partition: Optional[int] = None


@dataclass(frozen=True)
class Drop:
    """Silently lose every message of ``msg_type`` sent from ``src_site`` (to ``dst_sites`` if given)."""

    msg_type: str
    src_site: int
    src_partition: Optional[int] = None
    dst_sites: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class FaultSchedule:
    crashes: tuple[Crash, ...] = ()
    # before gst every message gets an extra uniform delay in [0, reorder_delay]
    gst: float = 0.0
    reorder_delay: float = 0.0
    jitter: float = 0.0
    flaky_leader: bool = False
    drops: tuple[Drop, ...] = ()

    def crashed_sites(self, partition: int) -> set[int]:
        return {c.site for c in self.crashes if c.partition is None or c.partition == partition}

    def max_crashes_per_partition(self, partitions) -> int:
        return max((len(self.crashed_sites(p)) for p in partitions), default=0)


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: Topology
    config: Config
    workload: Workload
    placement: tuple[int, ...] = ()
    faults: FaultSchedule = field(default_factory=FaultSchedule)
    seed: int = 0
    horizon: float = 600_000.0
    # (partition, site, clock) applied through a clock bump before the run starts
    initial_clocks: tuple[tuple[int, int, int], ...] = ()
    trace_stable: bool = False
    trace_all_messages: bool = False
    selftest: Optional[str] = None

    def __post_init__(self) -> None:
        placement = self.placement or tuple(range(len(self.topology.sites)))
        object.__setattr__(self, "placement", tuple(placement))
        if len(set(placement)) != len(placement):
            raise ConfigError("placement lists a site twice")
        if any(not 0 <= s < len(self.topology.sites) for s in placement):
            raise ConfigError("placement refers to an unknown site")
        if len(placement) != self.config.r:
            raise ConfigError(f"r={self.config.r} but placement has {len(placement)} sites")
        if self.selftest not in (None, "property1"):
            raise ConfigError(f"unknown selftest {self.selftest!r}")
        for c in self.faults.crashes:
            if c.site not in placement:
                raise ConfigError("crash refers to a site hosting no process")

    def with_seed(self, seed: int) -> Scenario:
        return dataclasses.replace(self, seed=seed)

    def replace(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    def partition_of(self, key: int) -> int:
        if self.config.partitions is None:
            return key
        return key % self.config.partitions


def uniform_recovery_timeout(topology: Topology) -> float:
    """Default takeover delay: five times the largest round-trip time."""
    return 5.0 * max(max(row) for row in topology.rtt) or 50.0


def fairness_scenario(f: int, clients_per_site: int = 512, commands_per_client: int = 3,
                      conflict_rate: float = 0.02, seed: int = 0) -> Scenario:
    topo = five_regions()
    return Scenario(
        name=f"fairness_5sites_f{f}",
        topology=topo,
        config=Config(r=5, f=f, partitions=None, recovery_timeout=uniform_recovery_timeout(topo)),
        workload=Workload(mode="conflict", clients_per_site=clients_per_site,
                          commands_per_client=commands_per_client, conflict_rate=conflict_rate),
        seed=seed,
    )


def pathological_scenario(commands: int = 300, spacing: float = 1.0, rtt: float = 10.0,
                          reorder_delay: float = 0.0, gst: float = 0.0, seed: int = 0) -> Scenario:
    """Three processes, one partition, every command on the same key, arrivals round-robin across sites."""
    topo = Topology.uniform(3, rtt, prefix="site")
    script = tuple(ScriptedCommand(at=k * spacing, site=k % 3, keys=(0,)) for k in range(commands))
    return Scenario(
        name="pathological_round_robin",
        topology=topo,
        config=Config(r=3, f=1, partitions=1, recovery_timeout=uniform_recovery_timeout(topo)),
        workload=Workload(mode="script", script=script),
        faults=FaultSchedule(gst=gst, reorder_delay=reorder_delay),
        seed=seed,
    )


def two_partition_example(mbump: bool = True) -> Scenario:
    """Two partitions over three sites, one process of each per site, clocks 5 and 9.

    A single command accessing both partitions is submitted at site 0.
    """
    topo = Topology.uniform(3, 20.0, prefix="dc")
    return Scenario(
        name="two_partition_example",
        topology=topo,
        config=Config(r=3, f=1, partitions=2, mbump=mbump, recovery_timeout=uniform_recovery_timeout(topo)),
        workload=Workload(mode="script", script=(ScriptedCommand(at=0.0, site=0, keys=(0, 1)),)),
        initial_clocks=tuple((0, s, 5) for s in range(3)) + tuple((1, s, 9) for s in range(3)),
        trace_stable=True,
    )


def coordinator_crash_example() -> Scenario:
    """Five regions, f=1; the coordinator's fast-path commit reaches no one else before it crashes.

    Clocks 5, 6 and 10 at the three fast-quorum members make the proposals 6, 7 and 11.
    """
    topo = five_regions()
    return Scenario(
        name="coordinator_crash_recovery",
        topology=topo,
        config=Config(r=5, f=1, partitions=1, recovery_timeout=500.0),
        workload=Workload(mode="script", script=(ScriptedCommand(at=0.0, site=0, keys=(0,)),)),
        initial_clocks=((0, 0, 5), (0, 1, 6), (0, 2, 10)),
        faults=FaultSchedule(crashes=(Crash(at=150.0, site=0),), drops=(Drop("MCommit", 0),)),
    )
