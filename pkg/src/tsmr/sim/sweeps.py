"""Randomised scenarios for seed sweeps: small deployments with reordering and crashes."""

from __future__ import annotations

import random

from ..core import Config
from .checkers import check_run
from .scenario import Crash, FaultSchedule, Scenario
from .simulator import run
from .topology import Topology
from .workload import Workload

CONFLICT_RATES = (0.02, 0.1, 1.0)


def random_topology(rng: random.Random, n: int) -> Topology:
    sites = tuple(f"s{k}" for k in range(n))
    m = [[0.0] * n for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            m[a][b] = m[b][a] = float(rng.randint(4, 60))
    return Topology(sites, tuple(tuple(row) for row in m))


def random_scenario(seed: int, liveness: bool = False) -> Scenario:
    """A small random deployment with at most f crashes per partition.

    Before GST every message is delayed by up to two maximum RTTs and the
    leader detector is flaky, so recoveries start spuriously and race.
    """
    rng = random.Random(f"sweep:{seed}")
    r = rng.choice((3, 5))
    f = rng.choice((1, 2)) if r == 5 else 1
    partitions = rng.randint(1, 3)
    topo = random_topology(rng, r)
    max_rtt = max(max(row) for row in topo.rtt)
    gst = rng.uniform(50.0, 400.0)
    crashes = []
    budget = rng.randint(0, f)
    for site in rng.sample(range(r), budget):
        whole_site = partitions == 1 or rng.random() < 0.5
        crashes.append(Crash(at=rng.uniform(0.0, gst + 100.0), site=site,
                             partition=None if whole_site else rng.randrange(partitions)))
    config = Config(
        r=r, f=f, partitions=partitions,
        mbump=rng.random() < 0.8,
        piggyback_promises=rng.random() < 0.8,
        promise_period=rng.choice((2.0, 5.0, 10.0)),
        recovery_timeout=rng.uniform(1.0, 3.0) * max_rtt,
        fd_period=5.0,
    )
    workload = Workload(
        mode="conflict",
        clients_per_site=rng.randint(1, 2),
        commands_per_client=rng.randint(2, 5),
        conflict_rate=rng.choice(CONFLICT_RATES),
        keyspace=6,
        keys_per_command=rng.choice((1, 2)) if partitions > 1 else 1,
    )
    faults = FaultSchedule(
        crashes=tuple(crashes), gst=gst, reorder_delay=rng.uniform(0.0, 2.0) * max_rtt,
        jitter=rng.choice((0.0, 2.0)), flaky_leader=rng.random() < 0.5,
    )
    return Scenario(
        name=f"{'liveness' if liveness else 'safety'}_sweep", topology=topo, config=config,
        workload=workload, faults=faults, seed=seed, horizon=120_000.0,
    )


def run_seed(seed: int, liveness: bool = False) -> tuple[int, dict]:
    """Run one sweep scenario; returns the seed and the failing checks (empty when all pass)."""
    result = run(random_scenario(seed, liveness))
    verdicts = check_run(result.trace)
    return seed, {name: v.as_dict() for name, v in verdicts.items() if not v.ok}
