"""Shared helpers: a hand-driven network of processes and the acceptance summary printer."""

from __future__ import annotations

from collections import deque

import pytest

from tsmr.core import Command, CommandId, Config, ProcessId
from tsmr.messages import MPayload
from tsmr.process import Process, StaticEnvironment

ACCEPTANCE_LINES: list[str] = []


class Network:
    """Processes over a StaticEnvironment with FIFO delivery and optional per-message filtering."""

    def __init__(self, r: int = 3, f: int = 1, partitions=(0,), rtt=None, **config):
        self.config = Config(r=r, f=f, partitions=len(partitions), **config)
        self.env = StaticEnvironment(range(r), partitions, rtt or (lambda a, b: 10.0 * abs(a - b)), self.config)
        self.procs = {ProcessId(p, s): Process(ProcessId(p, s), self.config, self.env)
                      for p in partitions for s in range(r)}
        self.queue: deque = deque()
        self.delivered: list = []
        self.crashed: set = set()

    def __getitem__(self, pid) -> Process:
        return self.procs[pid]

    def push(self, sends) -> None:
        for send in sends:
            for dst in send.dsts:
                self.queue.append((send.src, dst, send.msg))

    def deliver(self, src, dst, msg) -> None:
        self.push(self.procs[dst].handle(src, msg))

    def run(self, drop=lambda src, dst, msg: False, limit: int = 100_000) -> None:
        steps = 0
        while self.queue and steps < limit:
            src, dst, msg = self.queue.popleft()
            steps += 1
            if dst in self.crashed or drop(src, dst, msg):
                continue
            self.delivered.append((src, dst, msg))
            self.push(self.procs[dst].handle(src, msg))

    def sent(self, kind) -> list:
        return [rec for rec in self.env.records if rec["kind"] == "send" and isinstance(rec["msg"], kind)]

    def flush_promises(self) -> None:
        for proc in self.procs.values():
            if proc.id not in self.crashed:
                self.push(proc.tick_promises())
        self.run()


@pytest.fixture
def network():
    return Network


def command(submitter: ProcessId, seq: int, keys=None) -> Command:
    keys = keys or {submitter.partition: {0}}
    return Command(CommandId(submitter, seq), {p: frozenset(k) for p, k in keys.items()})


def payload(cmd: Command, quorums) -> MPayload:
    return MPayload(cmd.id, cmd, quorums)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
