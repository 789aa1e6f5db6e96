"""Sites, round-trip times and the five-region latency table used by the fairness scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..core import ConfigError

# Ping RTTs in ms. Site order puts Ireland first and its two closest
# neighbours next, so a 3-process quorum led from site 0 is sites 0, 1, 2.
FIVE_REGIONS = ("Ireland", "Canada", "NCalifornia", "Singapore", "SaoPaulo")
_FIVE_REGION_PAIRS = {
    ("Ireland", "NCalifornia"): 141,
    ("Ireland", "Singapore"): 186,
    ("Ireland", "Canada"): 72,
    ("Ireland", "SaoPaulo"): 183,
    ("NCalifornia", "Singapore"): 181,
    ("NCalifornia", "Canada"): 78,
    ("NCalifornia", "SaoPaulo"): 190,
    ("Singapore", "Canada"): 221,
    ("Singapore", "SaoPaulo"): 338,
    ("Canada", "SaoPaulo"): 123,
}


@dataclass(frozen=True)
class Topology:
    sites: tuple[str, ...]
    rtt: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.sites)
        if n == 0 or len(set(self.sites)) != n:
            raise ConfigError("sites must be a non-empty list of distinct names")
        if len(self.rtt) != n or any(len(row) != n for row in self.rtt):
            raise ConfigError(f"rtt must be a {n}x{n} matrix")
        for a in range(n):
            if self.rtt[a][a] != 0:
                raise ConfigError(f"rtt diagonal must be zero (site {self.sites[a]})")
            for b in range(n):
                if self.rtt[a][b] != self.rtt[b][a]:
                    raise ConfigError(f"rtt must be symmetric ({self.sites[a]}, {self.sites[b]})")
                if self.rtt[a][b] < 0:
                    raise ConfigError("rtt values must be non-negative")

    def index(self, name: str) -> int:
        try:
            return self.sites.index(name)
        except ValueError:
            raise ConfigError(f"unknown site {name!r}") from None

    def one_way(self, a: int, b: int) -> float:
        return self.rtt[a][b] / 2

    @classmethod
    def from_pairs(cls, sites: Sequence[str], pairs: dict) -> Topology:
        idx = {s: k for k, s in enumerate(sites)}
        m = [[0.0] * len(sites) for _ in sites]
        for (a, b), v in pairs.items():
            m[idx[a]][idx[b]] = m[idx[b]][idx[a]] = float(v)
        return cls(tuple(sites), tuple(tuple(row) for row in m))

    @classmethod
    def uniform(cls, n: int, rtt: float, prefix: str = "s") -> Topology:
        sites = tuple(f"{prefix}{k}" for k in range(n))
        return cls(sites, tuple(tuple(0.0 if a == b else float(rtt) for b in range(n)) for a in range(n)))


def five_regions() -> Topology:
    return Topology.from_pairs(FIVE_REGIONS, _FIVE_REGION_PAIRS)
