"""Synthetic shipping worlds driven by a known gravity law.

Ports are scattered uniformly on the sphere and grouped into regions
around seed ports. Each source port sends ``O_i = k * m_i**alpha`` trips a
year to a subset of nearby regions, split by

    p_ij = softmax_j(beta * ln M_j - gamma * ln d_ij + r_j)

where ``M_j`` is the region's total port mass, ``d_ij`` the great-circle
distance to the region centroid and ``r_j`` a random region effect. A
region's share is split over the source's trading partners in that region
(a mass-weighted random subset of its ports) in proportion to port mass.
With ``noise="none"`` trips are the expected (real-valued) flows, identical
every year; with ``noise="multinomial"`` each year's integer trips are a
multinomial draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParams
from .geo import GeoPoint, haversine_km, spherical_centroid
from .seeding import rng_for
from .shipnet import REGIONS_17, Port, Trip

YEARS = (2017, 2018, 2019)


@dataclass
class GravityParams:
    k: float = 100.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 2.0
    region_effect_scale: float = 0.5


@dataclass
class SynthWorld:
    ports: list
    trips: list
    trade: dict  # (origin_country, dest_country, year) -> usd
    env: dict  # port id -> (t_min, t_max, t_annual, salinity)
    sea_km: dict  # (src, dst) -> km
    truth: dict = field(default_factory=dict)

    def region_flows(self):
        """Expected region-level flows ``{(src, region): trips}`` per year."""
        return {tuple(k.split("|")): v for k, v in self.truth["region_flows"].items()}


def _region_names(n):
    if n <= len(REGIONS_17):
        return list(REGIONS_17[:n])
    return [f"Region {i:02d}" for i in range(n)]


def _country_code(r: int, c: int) -> str:
    return chr(ord("A") + r % 26) + chr(ord("A") + c % 26)


def generate_synthetic(n_ports: int = 60, n_regions: int = 6, params: GravityParams | None = None,
                       noise: str = "none", seed: int = 0, years=YEARS,
                       countries_per_region: int = 2, min_dest_regions: int = 2,
                       port_fraction: float = 0.3) -> SynthWorld:
    params = params or GravityParams()
    if n_regions < 2 or n_ports < n_regions:
        raise BadParams(f"need n_ports >= n_regions >= 2, got {n_ports} ports, {n_regions} regions")
    if not params.gamma > 0:
        raise BadParams("gamma must be positive")
    if noise not in ("none", "multinomial"):
        raise BadParams(f"unknown noise model {noise!r}")
    if not params.k > 0:
        raise BadParams("k must be positive")
    if not 0.0 < port_fraction <= 1.0:
        raise BadParams("port_fraction must lie in (0, 1]")

    rng = rng_for(seed, "synth.geometry")
    lat = np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n_ports)))
    lon = rng.uniform(-180.0, 180.0, n_ports)
    points = [GeoPoint(float(a), float(b)) for a, b in zip(lat, lon)]
    ids = [f"P{i:04d}" for i in range(n_ports)]

    # regions grow around the first n_regions ports
    region_idx = np.array([
        min(range(n_regions), key=lambda r: haversine_km(points[i], points[r])) for i in range(n_ports)
    ])
    region_idx[:n_regions] = np.arange(n_regions)
    names = _region_names(n_regions)
    country_rng = rng_for(seed, "synth.countries")
    country = [_country_code(region_idx[i], int(country_rng.integers(countries_per_region)))
               for i in range(n_ports)]
    ports = [Port(ids[i], f"Port {i}", points[i], country[i], names[region_idx[i]]) for i in range(n_ports)]

    mass_rng = rng_for(seed, "synth.mass")
    mass = mass_rng.lognormal(0.0, 1.0, n_ports)
    members = {r: [i for i in range(n_ports) if region_idx[i] == r] for r in range(n_regions)}
    region_mass = np.array([mass[members[r]].sum() for r in range(n_regions)])
    centroids = [spherical_centroid(points[i] for i in members[r]) for r in range(n_regions)]
    effects = rng_for(seed, "synth.effects").normal(0.0, params.region_effect_scale, n_regions)

    dest_rng = rng_for(seed, "synth.destinations")
    plan = {}  # source index -> (region list, probabilities)
    for i in range(n_ports):
        d = np.array([haversine_km(points[i], c) for c in centroids])
        candidates = [r for r in np.argsort(d) if any(p != i for p in members[r])]
        lo = min(min_dest_regions, len(candidates))
        n_dest = int(dest_rng.integers(lo, len(candidates) + 1))
        regs = sorted(int(r) for r in candidates[:n_dest])
        logits = np.array([params.beta * math.log(region_mass[r]) - params.gamma * math.log(d[r]) + effects[r]
                           for r in regs])
        p = np.exp(logits - logits.max())
        plan[i] = (regs, p / p.sum())

    # each source trades with a mass-weighted subset of every chosen region's ports
    link_rng = rng_for(seed, "synth.port_links")
    port_links = {}
    for i, (regs, _) in plan.items():
        for r in regs:
            mem = [p for p in members[r] if p != i]
            n_pick = max(1, int(round(port_fraction * len(mem))))
            pick = link_rng.choice(len(mem), size=n_pick, replace=False, p=mass[mem] / mass[mem].sum())
            port_links[(i, r)] = sorted(mem[k] for k in pick)

    def port_shares(r, src):
        mem = port_links[(src, r)]
        w = mass[mem]
        return mem, w / w.sum()

    O = params.k * mass ** params.alpha
    k_eff = params.k
    if noise == "none":
        # lift the scale so that every expected port-level trip count is >= 1
        smallest = min(O[i] * pi * sh
                       for i, (regs, p) in plan.items()
                       for r, pi in zip(regs, p)
                       for sh in port_shares(r, i)[1])
        if smallest < 1.0:
            # headroom keeps re-associated products from rounding below 1
            lift = (1.0 + 1e-9) / smallest
            O = O * lift
            k_eff = params.k * lift

    trips = []
    region_flows = {}
    trip_rng = rng_for(seed, "synth.trips")
    for year in years:
        for i in range(n_ports):
            regs, p = plan[i]
            dests, probs = [], []
            for r, pr in zip(regs, p):
                mem, sh = port_shares(r, i)
                dests.extend(mem)
                probs.extend(pr * sh)
                region_flows[f"{ids[i]}|{names[r]}"] = float(O[i] * pr)
            probs = np.array(probs)
            if noise == "none":
                counts = O[i] * probs
            else:
                total = max(1, int(round(O[i])))
                counts = trip_rng.multinomial(total, probs / probs.sum())
            for dst, c in zip(dests, counts):
                if c > 0:
                    trips.append(Trip(year, ids[i], ids[dst], float(c)))

    trade_rng = rng_for(seed, "synth.trade")
    codes = sorted(set(country))
    cmass = {c: sum(mass[i] for i in range(n_ports) if country[i] == c) for c in codes}
    trade = {}
    for a in codes:
        for b in codes:
            if a == b:
                continue
            base = 1e9 * cmass[a] * cmass[b] * trade_rng.lognormal(0.0, 0.5)
            for t, year in enumerate(years):
                trade[(a, b, year)] = float(round(base * (1.0 + 0.03 * t), 2))

    env_rng = rng_for(seed, "synth.env")
    env = {}
    for i, pt in enumerate(points):
        annual = 27.0 - 0.45 * abs(pt.lat) + env_rng.normal(0.0, 1.5)
        amp = 2.0 + 0.15 * abs(pt.lat) + abs(env_rng.normal(0.0, 1.0))
        sal = float(np.clip(35.0 + env_rng.normal(0.0, 1.5), 5.0, 41.0))
        env[ids[i]] = (round(annual - amp / 2, 3), round(annual + amp / 2, 3), round(annual, 3), round(sal, 3))

    sea_rng = rng_for(seed, "synth.searoutes")
    sea_km = {}
    for i in range(n_ports):
        for j in range(n_ports):
            if i != j:
                sea_km[(ids[i], ids[j])] = round(haversine_km(points[i], points[j]) * (1.0 + sea_rng.uniform(0.05, 0.4)), 3)

    truth = {
        "seed": seed,
        "noise": noise,
        "n_ports": n_ports,
        "n_regions": n_regions,
        "years": list(years),
        "k": params.k,
        "k_effective": k_eff,
        "alpha": params.alpha,
        "beta": params.beta,
        "gamma": params.gamma,
        "region_effect_scale": params.region_effect_scale,
        "region_effects": {names[r]: float(effects[r]) for r in range(n_regions)},
        "region_flows": region_flows,
    }
    return SynthWorld(ports, trips, trade, env, sea_km, truth)
