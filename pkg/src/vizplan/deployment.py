"""Deployment model: three sites on a linear network topology.

Data originates at the cloud, flows through the server, and renders at
the client. Transfers pay per-hop latency plus bytes over bandwidth;
client<->cloud traffic routes through the server.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

CLIENT, SERVER, CLOUD = "client", "server", "cloud"
SITES = (CLIENT, SERVER, CLOUD)

# position along the data path; smaller is closer to the data
_DEPTH = {CLOUD: 0, SERVER: 1, CLIENT: 2}


@dataclass(frozen=True)
class Site:
    id: str
    memory_budget_bytes: int | None  # None means unlimited
    compute_scale: float = 1.0

    def __post_init__(self):
        if self.id not in SITES:
            raise ValueError(f"unknown site {self.id!r}")
        if self.memory_budget_bytes is not None and self.memory_budget_bytes < 0:
            raise ValueError("negative memory budget")
        if self.compute_scale <= 0:
            raise ValueError("compute_scale must be positive")


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    latency_ms: float
    bandwidth_bytes_per_ms: float

    def __post_init__(self):
        if self.latency_ms < 0 or self.bandwidth_bytes_per_ms <= 0:
            raise ValueError("bad link parameters")

    def transfer_time(self, nbytes: int) -> float:
        return self.latency_ms + nbytes / self.bandwidth_bytes_per_ms


@dataclass(frozen=True)
class DeploymentModel:
    sites: tuple
    links: tuple  # exactly client<->server and server<->cloud

    def __init__(self, sites, links):
        object.__setattr__(self, "sites", tuple(sites))
        object.__setattr__(self, "links", tuple(links))
        ids = sorted(s.id for s in self.sites)
        if ids != sorted(SITES):
            raise ValueError(f"need exactly sites {SITES}, got {ids}")
        ends = {frozenset((l.a, l.b)) for l in self.links}
        expected = {frozenset((CLIENT, SERVER)), frozenset((SERVER, CLOUD))}
        if ends != expected:
            raise ValueError("need exactly client<->server and server<->cloud links")

    def site(self, site_id: str) -> Site:
        for s in self.sites:
            if s.id == site_id:
                return s
        raise KeyError(site_id)

    def link(self, a: str, b: str) -> Link:
        want = frozenset((a, b))
        for l in self.links:
            if frozenset((l.a, l.b)) == want:
                return l
        raise KeyError(f"no link {a}<->{b}")


def depth(site_id: str) -> int:
    return _DEPTH[site_id]


def upstream_or_equal(a: str, b: str) -> bool:
    """True when ``a`` is at or closer to the data source than ``b``."""
    return _DEPTH[a] <= _DEPTH[b]


def sites_from(start: str, toward_client: bool = True) -> list[str]:
    order = sorted(SITES, key=lambda s: _DEPTH[s])
    i = order.index(start)
    return order[i:] if toward_client else order[:i + 1]


def _hops(frm: str, to: str) -> list[tuple[str, str]]:
    path = [CLOUD, SERVER, CLIENT]
    i, j = path.index(frm), path.index(to)
    step = 1 if j > i else -1
    return [(path[k], path[k + step]) for k in range(i, j, step)]


def transfer_cost(dm: DeploymentModel, frm: str, to: str, nbytes: int) -> float:
    """Milliseconds to move ``nbytes`` along the unique site path."""
    if frm == to:
        raise ValueError("transfer requires distinct sites")
    return sum(dm.link(a, b).transfer_time(nbytes) for a, b in _hops(frm, to))


def fits(dm: DeploymentModel, placements: Mapping[str, int]) -> dict[str, bool]:
    """Per site, whether the placed bytes respect its memory budget."""
    out = {}
    for s in dm.sites:
        placed = int(placements.get(s.id, 0))
        budget = s.memory_budget_bytes
        out[s.id] = budget is None or placed <= budget
    return out


def default_deployment() -> DeploymentModel:
    """LAN-style defaults: 5 ms per hop, 1 Gbit/s links, a slower client."""
    return DeploymentModel(
        sites=[
            Site(CLIENT, 256 * 1024 * 1024, compute_scale=2.0),
            Site(SERVER, 4 * 1024 * 1024 * 1024, compute_scale=1.0),
            Site(CLOUD, None, compute_scale=1.0),
        ],
        links=[
            Link(CLIENT, SERVER, latency_ms=5.0,
                 bandwidth_bytes_per_ms=125_000.0),
            Link(SERVER, CLOUD, latency_ms=5.0,
                 bandwidth_bytes_per_ms=125_000.0),
        ],
    )


def deployment_to_json(dm: DeploymentModel) -> dict:
    return {
        "sites": [{"id": s.id, "memory_budget_bytes": s.memory_budget_bytes,
                   "compute_scale": s.compute_scale} for s in dm.sites],
        "links": [{"a": l.a, "b": l.b, "latency_ms": l.latency_ms,
                   "bandwidth_bytes_per_ms": l.bandwidth_bytes_per_ms}
                  for l in dm.links],
    }


def deployment_from_json(obj: dict) -> DeploymentModel:
    sites = [Site(s["id"], s["memory_budget_bytes"],
                  s.get("compute_scale", 1.0)) for s in obj["sites"]]
    links = [Link(l["a"], l["b"], l["latency_ms"],
                  l["bandwidth_bytes_per_ms"]) for l in obj["links"]]
    return DeploymentModel(sites, links)


def load_deployment(path: str) -> DeploymentModel:
    with open(path, "r", encoding="utf-8") as fh:
        return deployment_from_json(json.load(fh))
