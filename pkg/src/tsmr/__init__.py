"""Leaderless state-machine replication ordered by timestamp stability, with a deterministic simulator."""

from .core import Command, CommandId, Config, ConfigError, Phase, ProcessId
from .process import Process
from .sim.scenario import Scenario
from .sim.simulator import RunResult, run

__all__ = [
    "Command", "CommandId", "Config", "ConfigError", "Phase", "Process", "ProcessId",
    "RunResult", "Scenario", "run",
]
__version__ = "0.1.0"
