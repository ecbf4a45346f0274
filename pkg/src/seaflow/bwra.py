"""Ballast-water risk: environmental distance between ports and
trip-weighted distance distributions for observed and modeled flows."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistribution, EmptyFlows

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvProfile:
    """Minimum, maximum and annual mean water temperature (deg C) and salinity (PSU)."""

    t_min: float
    t_max: float
    t_annual: float
    salinity: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite environmental profile {vals.tolist()}")
        if not self.t_min <= self.t_annual <= self.t_max:
            raise ValueError(f"need t_min <= t_annual <= t_max, got {self.t_min}, {self.t_annual}, {self.t_max}")

    def as_array(self) -> np.ndarray:
        return np.array([self.t_min, self.t_max, self.t_annual, self.salinity], dtype=float)


def env_distance(a: EnvProfile, b: EnvProfile, scale=None) -> float:
    """Euclidean distance between the two 4-vectors, optionally after
    dividing each component by ``scale``."""
    diff = a.as_array() - b.as_array()
    if scale is not None:
        diff = diff / np.asarray(scale, dtype=float)
    return math.sqrt(float(diff @ diff))


def component_scale(env: dict) -> np.ndarray:
    """Per-component standard deviation across ports; zeros become 1."""
    X = np.array([p.as_array() for p in env.values()])
    s = X.std(axis=0)
    return np.where(s > 0, s, 1.0)


@dataclass
class RiskDistribution:
    edges: np.ndarray
    mass: np.ndarray
    provenance: str
    skipped: int = 0
    out_of_range: int = 0

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def rows(self):
        return [(float(lo), float(hi), float(m), self.provenance)
                for lo, hi, m in zip(self.edges[:-1], self.edges[1:], self.mass)]


def bin_index(edges, d: float):
    """Right-open bins with the last bin closed; None outside the edges."""
    if d < edges[0] or d > edges[-1]:
        return None
    if d == edges[-1]:
        return len(edges) - 2
    return int(np.searchsorted(edges, d, side="right")) - 1


def risk_distribution(flows, env: dict, bins, provenance: str = "true", standardize: bool = False) -> RiskDistribution:
    """Histogram of environmental distance weighted by trips.

    ``flows`` are ``(src, dst, trips)`` port-level routes. Routes with a
    port lacking a profile are skipped and counted.
    """
    flows = list(flows)
    if not flows:
        raise EmptyFlows("no routes to score")
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bins must be a strictly increasing edge list with >= 2 entries")
    scale = component_scale(env) if standardize else None
    mass = np.zeros(len(edges) - 1)
    skipped = outside = 0
    for src, dst, trips in flows:
        if src not in env or dst not in env:
            skipped += 1
            continue
        k = bin_index(edges, env_distance(env[src], env[dst], scale))
        if k is None:
            outside += 1
            continue
        mass[k] += trips
    if skipped:
        log.warning("risk distribution: skipped %d route(s) without environmental profiles", skipped)
    if outside:
        log.warning("risk distribution: %d route(s) fell outside the bin edges", outside)
    return RiskDistribution(edges, mass, provenance, skipped, outside)


def default_bins(env: dict, width: float = 1.0, standardize: bool = False) -> np.ndarray:
    """Edges from 0 past the largest pairwise distance in steps of ``width``."""
    X = np.array([p.as_array() for p in env.values()])
    if standardize:
        X = X / component_scale(env)
    diff = X[:, None, :] - X[None, :, :]
    dmax = float(np.sqrt((diff ** 2).sum(axis=-1)).max()) if len(X) else 0.0
    n = max(1, int(math.floor(dmax / width)) + 1)
    return np.arange(n + 1) * width


def compare_distributions(a: RiskDistribution, b: RiskDistribution) -> float:
    """Pearson correlation of the per-bin masses."""
    if a.edges.shape != b.edges.shape or not np.array_equal(a.edges, b.edges):
        raise ValueError("distributions use different bin edges")
    x = a.mass - a.mass.mean()
    y = b.mass - b.mass.mean()
    den = math.sqrt(float(x @ x) * float(y @ y))
    if den == 0:
        raise DegenerateDistribution("correlation undefined for a distribution with constant mass")
    return float(np.clip(float(x @ y) / den, -1.0, 1.0))


def disaggregate(region_flows, net, regions: dict | None = None) -> list:
    """Split ``(src, region, trips)`` flows over the region's ports in
    proportion to each port's historical inbound trips.

    The source port itself is excluded; a region whose other ports never
    received trips is split evenly over them.
    """
    inbound = net.in_flux()
    members = {}
    for pid, port in net.ports.items():
        reg = regions.get(pid) if regions is not None else port.region
        members.setdefault(reg, []).append(pid)
    out = []
    for src, reg, trips in region_flows:
        ports = [p for p in members.get(reg, []) if p != src]
        if not ports or trips <= 0:
            continue
        w = np.array([inbound[p] for p in ports], dtype=float)
        w = w / w.sum() if w.sum() > 0 else np.full(len(ports), 1.0 / len(ports))
        out.extend((src, p, float(trips * s)) for p, s in zip(ports, w) if s > 0)
    return out
