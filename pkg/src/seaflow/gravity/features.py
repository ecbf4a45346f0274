"""Origin/destination-region samples and their ten input features."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import EmptySampleSet, UnknownRegion
from ..geo import DistanceProvider, haversine_km, sea_distance_km, spherical_centroid

FEATURE_NAMES = (
    "origin_flux",
    "dest_region_flux",
    "distance_km",
    "bilateral_trade_usd",
    "betweenness_origin",
    "betweenness_dest_median",
    "closeness_origin",
    "closeness_dest_median",
    "pagerank_origin",
    "pagerank_dest_median",
)
N_FEATURES = len(FEATURE_NAMES)
# heavy-tailed, non-negative columns that may be log1p-compressed before z-scoring
HEAVY_TAILED = (0, 1, 2, 3)


@dataclass(frozen=True)
class FlowSample:
    """One source port and its candidate destination regions.

    ``X`` is (N, 10) in :data:`FEATURE_NAMES` order; ``y`` holds the observed
    trips to each region and ``O`` the port's total departures.
    """

    source_port: str
    O: float
    regions: tuple
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if len(self.regions) < 1:
            raise ValueError("a flow sample needs at least one destination")
        if len(set(self.regions)) != len(self.regions):
            raise ValueError(f"duplicate destination regions in sample {self.source_port}")
        if self.X.shape != (len(self.regions), N_FEATURES) or self.y.shape != (len(self.regions),):
            raise ValueError("feature/target shapes do not match the destination count")

    @property
    def N(self):
        return len(self.regions)


def region_members(ports: dict, regions: dict | None = None) -> dict:
    """``{region: [port ids]}`` preserving port order."""
    out = {}
    for pid, port in ports.items():
        reg = regions.get(pid) if regions is not None else port.region
        if reg is None:
            raise UnknownRegion(f"port {pid!r} has no region")
        out.setdefault(reg, []).append(pid)
    return out


def trade_volume(trade: dict, origin_country: str, dest_countries, years) -> float:
    """Mean annual export value from one country to a set of countries.

    Intra-country pairs and absent entries count as zero.
    """
    years = list(years)
    total = 0.0
    for c in dest_countries:
        if c == origin_country:
            continue
        for yr in years:
            total += trade.get((origin_country, c, yr), 0.0)
    return total / max(1, len(years))


def assemble_samples(links, net, metrics, trade: dict | None = None, regions: dict | None = None,
                     provider: DistanceProvider | None = None) -> list:
    """Build one :class:`FlowSample` per source port with predicted links.

    ``links`` are (src, dst) port pairs predicted real; a source's candidate
    destinations are the distinct regions of its linked ports. Targets come
    from the observed trips in ``net``.
    """
    trade = trade or {}
    provider = provider or DistanceProvider()
    members = region_members(net.ports, regions)
    region_of = {p: r for r, ps in members.items() for p in ps}
    for s, d in links:
        for p in (s, d):
            if p not in region_of:
                raise UnknownRegion(f"link endpoint {p!r} is not a known port with a region")

    out_flux = net.out_flux()
    in_flux = net.in_flux()
    region_flux = {r: sum(in_flux[p] for p in ps) for r, ps in members.items()}
    centroid = {r: spherical_centroid(net.ports[p].point for p in ps) for r, ps in members.items()}
    countries = {r: sorted({net.ports[p].country for p in ps}) for r, ps in members.items()}

    def med(metric, r):
        return float(np.median([metric[p] for p in members[r]]))

    medians = {
        r: (med(metrics.betweenness, r), med(metrics.closeness, r), med(metrics.pagerank, r))
        for r in members
    }
    years = range(net.year_range[0], net.year_range[1] + 1)

    dests = {}
    for s, d in links:
        dests.setdefault(s, set()).add(region_of[d])
    observed = {}
    for (s, d), w in net.edges.items():
        key = (s, region_of[d])
        observed[key] = observed.get(key, 0.0) + w

    samples = []
    for s in net.ports:
        if s not in dests:
            continue
        regs = sorted(dests[s])
        ps = net.ports[s]
        rows = []
        for r in regs:
            if provider.mode == "table":
                dist = float(np.mean([sea_distance_km(provider, s, p, ps.point, net.ports[p].point)
                                      for p in members[r] if p != s] or [0.0]))
            else:
                dist = haversine_km(ps.point, centroid[r])
                if provider.mode == "haversine_scaled":
                    dist *= provider.factor
            bm, cm, pm = medians[r]
            rows.append([
                out_flux[s],
                region_flux[r],
                dist,
                trade_volume(trade, ps.country, countries[r], years),
                metrics.betweenness[s], bm,
                metrics.closeness[s], cm,
                metrics.pagerank[s], pm,
            ])
        y = np.array([observed.get((s, r), 0.0) for r in regs], dtype=float)
        samples.append(FlowSample(s, float(out_flux[s]), tuple(regs), np.array(rows, dtype=float), y))
    if not samples:
        raise EmptySampleSet("no source port has a predicted destination")
    return samples


@dataclass
class FeatureScaler:
    """Per-feature z-score, optionally after ``log1p`` on selected columns."""

    mean: np.ndarray
    std: np.ndarray
    log_columns: tuple = ()

    def _pre(self, X):
        X = np.array(X, dtype=float, copy=True)
        for c in self.log_columns:
            X[:, c] = np.log1p(np.maximum(X[:, c], 0.0))
        return X

    def transform(self, X):
        return (self._pre(X) - self.mean) / self.std

    def inverse(self, Z):
        X = np.asarray(Z, dtype=float) * self.std + self.mean
        for c in self.log_columns:
            X[:, c] = np.expm1(X[:, c])
        return X

    @classmethod
    def fit(cls, samples, log_columns=()):
        tmp = cls(np.zeros(N_FEATURES), np.ones(N_FEATURES), tuple(log_columns))
        X = tmp._pre(np.vstack([s.X for s in samples]))
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        # constant columns are only centered
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std, tuple(log_columns))

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "log_columns": list(self.log_columns)}


def scale_features(train, samples, log_columns=()):
    """Fit a scaler on ``train`` only and apply it to ``samples``."""
    scaler = FeatureScaler.fit(train, log_columns)
    return [replace(s, X=scaler.transform(s.X)) for s in samples], scaler
