"""The replicated key-value state machine that executed commands are applied to."""

from __future__ import annotations

from typing import Hashable

from .core import Command, PartitionId


class KvState:
    """Per-partition maps from key to value, mutated only by :meth:`apply`."""

    def __init__(self) -> None:
        self.data: dict[PartitionId, dict[Hashable, bytes]] = {}

    def apply(self, cmd: Command, partition: PartitionId) -> dict[Hashable, bytes]:
        """Run the part of ``cmd`` touching ``partition``.

        A write stores the payload under every accessed key and returns the
        previous values; a read returns the current ones. Missing keys read
        as empty.
        """
        store = self.data.setdefault(partition, {})
        out = {}
        for key in sorted(cmd.keys(partition), key=repr):
            out[key] = store.get(key, b"")
            if cmd.write:
                store[key] = cmd.payload
        return out

    def get(self, partition: PartitionId, key: Hashable) -> bytes:
        return self.data.get(partition, {}).get(key, b"")


def aggregate(outputs: dict[PartitionId, dict]) -> dict:
    """Merge the per-partition outputs of one command into a single result."""
    merged: dict = {}
    for p in sorted(outputs):
        merged.update(outputs[p])
    return merged
