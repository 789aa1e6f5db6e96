import pytest

from tsmr.core import (
    Command, CommandId, Config, ConfigError, InsufficientReplicas, Phase, PHASE_EDGES, ProcessId,
    closest_replicas, fast_quorums, id_order, next_id,
)
from tsmr.sim.topology import FIVE_REGIONS, five_regions

A, B = ProcessId(0, 0), ProcessId(0, 1)


def test_next_id_counts_per_submitter():
    counters = {}
    assert next_id(A, counters) == CommandId(A, 0)
    assert next_id(A, counters) == CommandId(A, 1)
    assert counters[A] == 2
    assert next_id(B, counters) == CommandId(B, 0)
    assert CommandId(B, 0) != CommandId(A, 0)


def test_id_order():
    assert id_order(CommandId(A, 3), CommandId(A, 4)) == -1
    assert id_order(CommandId(A, 9), CommandId(B, 0)) == -1
    assert id_order(CommandId(A, 3), CommandId(A, 3)) == 0
    assert id_order(CommandId(B, 0), CommandId(A, 9)) == 1


def test_ids_round_trip_through_text():
    cid = CommandId(ProcessId(2, 4), 17)
    assert str(cid) == "2:4/17"
    assert CommandId.parse(str(cid)) == cid
    assert ProcessId.parse("3:1") == ProcessId(3, 1)


@pytest.mark.parametrize("r,f", [(3, 0), (3, 2), (5, 3), (2, 1), (7, 4)])
def test_config_rejects_bad_fault_thresholds(r, f):
    with pytest.raises(ConfigError):
        Config(r=r, f=f)


@pytest.mark.parametrize("r,f,fast,slow,rec", [(3, 1, 2, 2, 2), (5, 1, 3, 2, 4), (5, 2, 4, 3, 3), (7, 3, 6, 4, 4)])
def test_quorum_sizes(r, f, fast, slow, rec):
    c = Config(r=r, f=f)
    assert (c.fast_quorum_size, c.slow_quorum_size, c.recovery_quorum_size) == (fast, slow, rec)


def test_phase_edges_follow_command_journey():
    assert PHASE_EDGES[Phase.START] == {Phase.PAYLOAD, Phase.PROPOSE}
    assert PHASE_EDGES[Phase.PAYLOAD] == {Phase.RECOVER_R, Phase.COMMIT}
    assert PHASE_EDGES[Phase.PROPOSE] == {Phase.RECOVER_P, Phase.COMMIT}
    assert PHASE_EDGES[Phase.COMMIT] == {Phase.EXECUTE}
    assert not PHASE_EDGES[Phase.EXECUTE]
    assert {p for p in Phase if p.pending} == {Phase.PAYLOAD, Phase.PROPOSE, Phase.RECOVER_R, Phase.RECOVER_P}


def test_command_requires_an_access():
    with pytest.raises(ValueError):
        Command(CommandId(A, 0), {})


def _five_region_env():
    topo = five_regions()
    replicas = lambda p: tuple(ProcessId(p, s) for s in range(5))
    rtt = lambda a, b: topo.rtt[a.site][b.site]
    return topo, replicas, rtt


def test_fast_quorum_from_ireland_sorts_its_latency_row():
    topo, replicas, rtt = _five_region_env()
    q = fast_quorums(ProcessId(0, 0), [0], replicas, rtt, 3)[0]
    # oracle: sort Ireland's row of the latency table by hand
    row = {"Canada": 72, "NCalifornia": 141, "SaoPaulo": 183, "Singapore": 186}
    nearest = sorted(row, key=row.get)[:2]
    assert [FIVE_REGIONS[j.site] for j in q] == ["Ireland", *nearest]


def test_fast_quorum_has_requested_size_coordinator_first():
    replicas = lambda p: tuple(ProcessId(p, s) for s in range(3))
    q = fast_quorums(ProcessId(0, 2), [0], replicas, lambda a, b: abs(a.site - b.site), 2)[0]
    assert q[0] == ProcessId(0, 2) and len(q) == 2
    q = fast_quorums(ProcessId(0, 1), [0], replicas, lambda a, b: abs(a.site - b.site), 3)[0]
    assert q[0] == ProcessId(0, 1) and set(q) == set(replicas(0))


def test_fast_quorum_of_remote_partition_is_led_by_closest_replica():
    topo, replicas, rtt = _five_region_env()
    i = ProcessId(0, 3)  # Singapore
    qs = fast_quorums(i, [0, 1], replicas, rtt, 3)
    assert set(qs) == {0, 1}
    coordinator = min(replicas(1), key=lambda j: (rtt(i, j), j))
    assert qs[1][0] == coordinator
    assert all(j.partition == 1 for j in qs[1])


def test_suspected_processes_are_avoided_but_fill_when_needed():
    replicas = lambda p: tuple(ProcessId(p, s) for s in range(3))
    rtt = lambda a, b: abs(a.site - b.site)
    q = fast_quorums(ProcessId(0, 0), [0], replicas, rtt, 3, suspected={ProcessId(0, 1)})[0]
    assert q[:2] == (ProcessId(0, 0), ProcessId(0, 2)) and q[2] == ProcessId(0, 1)
    assert closest_replicas(ProcessId(0, 0), [0], replicas, rtt, {ProcessId(0, 0)})[0] == ProcessId(0, 1)


def test_too_few_replicas():
    with pytest.raises(InsufficientReplicas):
        fast_quorums(A, [0], lambda p: (A, B), lambda a, b: 1.0, 3)
