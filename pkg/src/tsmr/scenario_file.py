"""Loading scenario files: YAML (or JSON) validated against ``scenario.schema.json``."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import yaml

from .core import Config, ConfigError
from .sim.scenario import Crash, Drop, FaultSchedule, Scenario, uniform_recovery_timeout
from .sim.sweeps import random_scenario
from .sim.topology import Topology, five_regions
from .sim.workload import ScriptedCommand, Workload

BUNDLED = "scenarios"


def schema() -> dict:
    return json.loads(resources.files("tsmr").joinpath("scenario.schema.json").read_text())


@dataclass(frozen=True)
class ScenarioSpec:
    """A parsed scenario file; ``build(seed)`` produces the scenario for one seed."""

    name: str
    seed: int
    doc: dict

    def build(self, seed: Optional[int] = None) -> Scenario:
        seed = self.seed if seed is None else seed
        generator = self.doc.get("generator")
        if generator is not None:
            scenario = random_scenario(seed, liveness=generator.get("liveness", False))
            return scenario.replace(name=self.name)
        return _build(self.doc, seed)


def bundled_names() -> list[str]:
    root = resources.files("tsmr").joinpath(BUNDLED)
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve(ref: str) -> Path:
    """A path on disk, or the name of a bundled scenario (with or without ``.yaml``)."""
    path = Path(ref)
    if path.exists():
        return path
    name = ref[: -len(".yaml")] if ref.endswith(".yaml") else ref
    bundled = resources.files("tsmr").joinpath(BUNDLED, f"{name}.yaml")
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"no scenario file or bundled scenario named {ref!r}")


def load(ref: str) -> ScenarioSpec:
    path = resolve(ref)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse(doc)


def parse(doc: Any) -> ScenarioSpec:
    """Validate ``doc`` and check it builds; raises :class:`ConfigError` otherwise."""
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"scenario invalid at {where}: {exc.message}") from None
    spec = ScenarioSpec(name=doc["name"], seed=doc.get("seed", 0), doc=doc)
    spec.build()
    return spec


def _topology(block: dict) -> Topology:
    if "preset" in block:
        return five_regions()
    sites = tuple(block["sites"])
    if "uniform_rtt" in block:
        rtt = float(block["uniform_rtt"])
        return Topology(sites, tuple(tuple(0.0 if a == b else rtt for b in range(len(sites)))
                                     for a in range(len(sites))))
    return Topology(sites, tuple(tuple(float(x) for x in row) for row in block["rtt"]))


def _build(doc: dict, seed: int) -> Scenario:
    topo = _topology(doc["topology"])
    proto = dict(doc["protocol"])
    if proto.get("partitions") == "per-key":
        proto["partitions"] = None
    proto.setdefault("recovery_timeout", uniform_recovery_timeout(topo))
    config = Config(**proto)

    w = dict(doc.get("workload", {}))
    if "script" in w:
        w["script"] = tuple(ScriptedCommand(float(c["at"]), c["site"], tuple(c["keys"])) for c in w["script"])
    workload = Workload(**w)

    f = dict(doc.get("faults", {}))
    crashes = tuple(Crash(float(c["at"]), c["site"], c.get("partition")) for c in f.pop("crashes", ()))
    drops = tuple(
        Drop(d["type"], d["src_site"], d.get("src_partition"),
             tuple(d["dst_sites"]) if "dst_sites" in d else None)
        for d in f.pop("drops", ())
    )
    faults = FaultSchedule(crashes=crashes, drops=drops, **f)

    kwargs: dict = {}
    if "horizon" in doc:
        kwargs["horizon"] = float(doc["horizon"])
    return Scenario(
        name=doc["name"], topology=topo, config=config, workload=workload,
        placement=tuple(doc.get("placement", ())), faults=faults, seed=seed,
        initial_clocks=tuple((c["partition"], c["site"], c["clock"]) for c in doc.get("initial_clocks", ())),
        trace_stable=doc.get("trace_stable", False),
        trace_all_messages=doc.get("trace_all_messages", False),
        selftest=doc.get("selftest"), **kwargs,
    )
