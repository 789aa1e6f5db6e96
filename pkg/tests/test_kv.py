from tsmr.core import Command, CommandId, ProcessId
from tsmr.kv import KvState, aggregate

A = ProcessId(0, 0)


def cmd(seq, keys, payload=b"", write=True, partition=0):
    return Command(CommandId(A, seq), {partition: frozenset(keys)}, payload, write)


def test_put_returns_previous_value():
    kv = KvState()
    assert kv.apply(cmd(0, {"k"}, b"v"), 0) == {"k": b""}
    assert kv.get(0, "k") == b"v"
    assert kv.apply(cmd(1, {"k"}, b"w"), 0) == {"k": b"v"}


def test_get_reads_current_value():
    kv = KvState()
    kv.apply(cmd(0, {"k"}, b"v"), 0)
    assert kv.apply(cmd(1, {"k"}, write=False), 0) == {"k": b"v"}
    assert kv.get(0, "k") == b"v"
    assert kv.get(0, "missing") == b""


def test_same_sequence_same_state():
    seq = [cmd(k, {k % 3}, bytes([k])) for k in range(20)]
    a, b = KvState(), KvState()
    for c in seq:
        a.apply(c, 0)
        b.apply(c, 0)
    assert a.data == b.data


def test_aggregate_merges_partitions():
    assert aggregate({1: {"y": b"2"}, 0: {"x": b"1"}}) == {"x": b"1", "y": b"2"}
