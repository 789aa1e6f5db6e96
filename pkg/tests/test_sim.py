"""Simulator: topology, workload generation, determinism and latency behaviour."""

import hashlib
import json
import random

import pytest

from tsmr.core import Config, ConfigError, ProcessId
from tsmr.sim.checkers import all_ok, check_run
from tsmr.sim.scenario import (
    Crash, FaultSchedule, Scenario, coordinator_crash_example, pathological_scenario, two_partition_example,
)
from tsmr.sim.simulator import Simulation, run
from tsmr.sim.sweeps import run_seed
from tsmr.sim.topology import Topology, five_regions
from tsmr.sim.workload import Client, KeyChooser, Workload, ZipfSampler


def _hash(trace):
    return hashlib.sha256(json.dumps(trace, sort_keys=True).encode()).hexdigest()


def test_topology_validation():
    with pytest.raises(ConfigError):
        Topology(("a", "b"), ((0, 1), (2, 0)))
    with pytest.raises(ConfigError):
        Topology(("a", "b"), ((1, 1), (1, 0)))
    with pytest.raises(ConfigError):
        Topology(("a", "a"), ((0, 1), (1, 0)))


def test_five_regions_one_way_delay():
    topo = five_regions()
    ireland, canada = topo.index("Ireland"), topo.index("Canada")
    assert topo.rtt[ireland][canada] == 72
    assert topo.one_way(ireland, canada) == 36


def test_conflict_rate_extremes_and_fraction():
    rng = random.Random(1)
    client = Client(index=3, site=0, private_key=4, remaining=1)
    always = KeyChooser(Workload(conflict_rate=1.0))
    never = KeyChooser(Workload(conflict_rate=0.0))
    assert all(always.keys(client, rng) == (0,) for _ in range(100))
    assert all(never.keys(client, rng) == (4,) for _ in range(100))
    chooser = KeyChooser(Workload(conflict_rate=0.02))
    draws = 10 ** 6
    hits = sum(chooser.keys(client, rng)[0] == 0 for _ in range(draws))
    assert abs(hits / draws - 0.02) <= 0.005


def test_zipf_sampler_favours_low_ranks():
    rng = random.Random(2)
    z = ZipfSampler(100, 1.0)
    draws = [z.sample(rng) for _ in range(20000)]
    assert min(draws) >= 1 and max(draws) <= 100
    # oracle: P(1) = 1 / H(100)
    harmonic = sum(1 / k for k in range(1, 101))
    assert abs(draws.count(1) / len(draws) - 1 / harmonic) < 0.02


def test_zipf_two_distinct_keys():
    chooser = KeyChooser(Workload(mode="zipf", keyspace=10, keys_per_command=2))
    rng = random.Random(3)
    client = Client(index=0, site=0, private_key=1, remaining=1)
    for _ in range(200):
        a, b = chooser.keys(client, rng)
        assert a != b


def test_workload_validation():
    with pytest.raises(ConfigError):
        Workload(conflict_rate=1.5)
    with pytest.raises(ConfigError):
        Workload(keys_per_command=3)


def test_scenario_validation():
    topo = Topology.uniform(3, 10.0)
    with pytest.raises(ConfigError):
        Scenario("x", topo, Config(r=5, f=1), Workload())
    with pytest.raises(ConfigError):
        Scenario("x", topo, Config(r=3, f=1), Workload(), faults=FaultSchedule(crashes=(Crash(1.0, 7),)))


def test_same_seed_same_trace():
    s = pathological_scenario(commands=30, reorder_delay=20.0, gst=100.0, seed=4)
    assert _hash(run(s).trace) == _hash(run(s).trace)
    assert _hash(run(s.with_seed(5)).trace) != _hash(run(s).trace)


def test_zero_clients():
    s = Scenario("empty", Topology.uniform(3, 10.0), Config(r=3, f=1), Workload(clients_per_site=0))
    result = run(s)
    assert all(not v for v in result.latencies.values())
    assert all_ok(check_run(result.trace))


def test_self_addressed_messages_are_immediate():
    # a single-site-latency-free command: r=3 with all RTTs zero commits at time 0
    s = Scenario("zero", Topology.uniform(3, 0.0), Config(r=3, f=1),
                 Workload(clients_per_site=1, commands_per_client=1))
    result = run(s)
    assert all(x == 0.0 for v in result.commit_latencies.values() for x in v)


def test_messages_to_crashed_process_are_dropped():
    s = Scenario("crash", Topology.uniform(3, 10.0), Config(r=3, f=1),
                 Workload(clients_per_site=1, commands_per_client=3),
                 faults=FaultSchedule(crashes=(Crash(0.5, 2),)))
    sim = Simulation(s)
    result = sim.run()
    crashed = ProcessId(0, 2)
    assert not [rec for rec in result.trace if rec["kind"] == "exec" and rec["src"] == str(crashed)]
    assert all_ok(check_run(result.trace))


def test_commit_latency_equals_farthest_fast_quorum_member():
    topo = five_regions()
    s = Scenario("law", topo, Config(r=5, f=1, partitions=1, recovery_timeout=5000.0),
                 Workload(clients_per_site=1, commands_per_client=1, conflict_rate=0.0))
    result = run(s)
    for site in range(5):
        # oracle: the two nearest other sites by hand-sorted RTT row
        row = sorted((topo.rtt[site][j], j) for j in range(5) if j != site)
        assert result.commit_latencies[site] == [max(row[0][0], row[1][0])]


def test_pathological_single_command():
    result = run(pathological_scenario(commands=1))
    assert len([r for r in result.trace if r["kind"] == "exec"]) == 3


def test_pathological_with_reordering_completes_after_gst():
    result = run(pathological_scenario(commands=60, reorder_delay=40.0, gst=200.0, seed=7))
    verdicts = check_run(result.trace)
    assert all_ok(verdicts)
    assert len([r for r in result.trace if r["kind"] == "return"]) == 60


def test_two_partition_example_final_timestamp():
    result = run(two_partition_example(True))
    commits = [r for r in result.trace if r["kind"] == "commit"]
    assert {r["ts"] for r in commits} == {10}
    assert {r["partition_ts"] for r in commits} == {6, 10}


def test_coordinator_crash_example_recovers_fast_timestamp():
    result = run(coordinator_crash_example())
    (decision,) = [r for r in result.trace if r["kind"] == "decision"]
    recoveries = [r for r in result.trace if r["kind"] == "recovery"]
    assert decision["path"] == "fast"
    assert recoveries and all(r["ts"] == decision["ts"] for r in recoveries)
    assert all_ok(check_run(result.trace))


@pytest.mark.parametrize("seed", [28, 52, 62, 68, 95, 1690, 2109])
def test_sweep_regressions(seed):
    # 28..95: a multi-partition coordinator answered recovery after its fast commit
    # 1690, 2109: a first recovery ballot collided with an initial slow-path ballot
    _, failing = run_seed(seed)
    assert failing == {}
