"""Directed weighted shipping network: construction, centralities and the
fully connected real/pseudo link table used for link prediction."""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateRange, InsufficientPseudo, NoConvergence, SelfLoop, UnknownPort
from .geo import DistanceProvider, GeoPoint, haversine_km, sea_distance_km

log = logging.getLogger(__name__)

REGIONS_17 = (
    "Northern Europe", "Western Europe", "Southern Europe", "Eastern Europe",
    "Northern Africa", "Sub-Saharan Africa", "Western Asia", "Central Asia",
    "Southern Asia", "Eastern Asia", "South-eastern Asia", "Oceania",
    "Northern America", "Central America", "Caribbean", "South America",
    "Antarctica",
)

WEIGHT_MODES = ("trips", "reciprocal_trips", "unit")
DEFAULT_PSEUDO_WEIGHT = 0.1


@dataclass(frozen=True)
class Port:
    id: str
    name: str
    point: GeoPoint
    country: str
    region: str


@dataclass(frozen=True)
class Trip:
    year: int
    src: str
    dst: str
    trips: float


@dataclass
class ShippingNetwork:
    ports: dict  # id -> Port, insertion ordered
    edges: dict  # (src, dst) -> summed trip count
    year_range: tuple = (0, 0)

    @property
    def port_ids(self) -> list:
        return list(self.ports)

    def __len__(self):
        return len(self.ports)

    def total_trips(self) -> float:
        return float(sum(self.edges.values()))

    def out_flux(self) -> dict:
        out = dict.fromkeys(self.ports, 0.0)
        for (s, _), w in self.edges.items():
            out[s] += w
        return out

    def in_flux(self) -> dict:
        inn = dict.fromkeys(self.ports, 0.0)
        for (_, d), w in self.edges.items():
            inn[d] += w
        return inn

    def adjacency(self, weight_mode: str = "unit") -> dict:
        """Outgoing adjacency ``{u: [(v, cost), ...]}`` with the chosen edge cost."""
        if weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")
        adj = {p: [] for p in self.ports}
        for (s, d), w in self.edges.items():
            if weight_mode == "trips":
                c = float(w)
            elif weight_mode == "reciprocal_trips":
                c = 1.0 / float(w)
            else:
                c = 1.0
            adj[s].append((d, c))
        return adj


def build_network(trips, ports, years=None) -> ShippingNetwork:
    """Sum trip rows into edge weights.

    ``years`` optionally restricts the rows used (inclusive ``(first, last)``).
    """
    port_map = {}
    for p in ports:
        port_map[p.id] = p
    edges = {}
    seen_years = []
    for t in trips:
        if years is not None and not years[0] <= t.year <= years[1]:
            continue
        if t.src not in port_map:
            raise UnknownPort(f"trip references unknown port {t.src!r}")
        if t.dst not in port_map:
            raise UnknownPort(f"trip references unknown port {t.dst!r}")
        if t.src == t.dst:
            raise SelfLoop(f"self-loop trip at port {t.src!r}")
        if not t.trips >= 1:
            raise ValueError(f"trip count must be >= 1, got {t.trips}")
        key = (t.src, t.dst)
        edges[key] = edges.get(key, 0) + t.trips
        seen_years.append(t.year)
    if years is not None:
        year_range = tuple(years)
    elif seen_years:
        year_range = (min(seen_years), max(seen_years))
    else:
        year_range = (0, 0)
    return ShippingNetwork(ports=port_map, edges=edges, year_range=year_range)


# ---------------------------------------------------------------------------
# shortest-path machinery

def _dijkstra_sigma(adj, source):
    """Single-source shortest paths with path counts (Brandes phase one).

    Returns (settle order, distances, sigma, predecessor lists).
    """
    dist = {source: 0.0}
    sigma = {source: 1.0}
    preds = {source: []}
    order = []
    done = set()
    heap = [(0.0, 0, source)]
    counter = 1
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        order.append(u)
        for v, c in adj[u]:
            nd = d + c
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                sigma[v] = sigma[u]
                preds[v] = [u]
                heapq.heappush(heap, (nd, counter, v))
                counter += 1
            elif nd == dist[v] and v not in done:
                sigma[v] += sigma[u]
                preds[v].append(u)
    return order, dist, sigma, preds


def shortest_path_lengths(adj, source) -> dict:
    dist = {source: 0.0}
    heap = [(0.0, 0, source)]
    done = set()
    counter = 1
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, c in adj[u]:
            nd = d + c
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, counter, v))
                counter += 1
    return dist


def betweenness(net: ShippingNetwork, weight_mode: str = "trips", normalized: bool = False) -> dict:
    """Directed betweenness over ordered pairs (Brandes accumulation).

    ``weight_mode="trips"`` uses the trip counts as path costs verbatim,
    ``"reciprocal_trips"`` uses 1/w and ``"unit"`` counts hops. With
    ``normalized`` the raw score is divided by (n-1)(n-2).
    """
    adj = net.adjacency(weight_mode)
    cb = dict.fromkeys(net.ports, 0.0)
    for s in net.ports:
        order, _, sigma, preds = _dijkstra_sigma(adj, s)
        delta = dict.fromkeys(order, 0.0)
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    if normalized:
        n = len(net.ports)
        scale = 1.0 / ((n - 1) * (n - 2)) if n > 2 else 0.0
        cb = {k: v * scale for k, v in cb.items()}
    return cb


def closeness(net: ShippingNetwork, weight_mode: str = "trips") -> dict:
    """Outgoing closeness with reachability scaling for disconnected graphs:
    ``(r/(n-1)) * (r / sum of distances to the r reachable nodes)``."""
    adj = net.adjacency(weight_mode)
    n = len(net.ports)
    out = {}
    for s in net.ports:
        dist = shortest_path_lengths(adj, s)
        r = len(dist) - 1
        total = sum(dist.values())
        if r == 0 or total <= 0 or n < 2:
            out[s] = 0.0
        else:
            out[s] = (r / (n - 1)) * (r / total)
    return out


def transition_matrix(net: ShippingNetwork):
    """Row-stochastic trip-proportional transition matrix and dangling mask."""
    ids = net.port_ids
    index = {p: i for i, p in enumerate(ids)}
    n = len(ids)
    W = np.zeros((n, n))
    for (s, d), w in net.edges.items():
        W[index[s], index[d]] += w
    rowsum = W.sum(axis=1)
    dangling = rowsum == 0
    P = np.divide(W, rowsum[:, None], out=np.zeros_like(W), where=~dangling[:, None])
    return P, dangling


def pagerank(net: ShippingNetwork, damping: float = 0.85, tol: float = 1e-10, max_iter: int = 1000) -> dict:
    """Weighted PageRank by power iteration; dangling mass spreads uniformly."""
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    if not tol > 0:
        raise ValueError("tol must be positive")
    ids = net.port_ids
    n = len(ids)
    if n == 0:
        return {}
    P, dangling = transition_matrix(net)
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = damping * (pi @ P + pi[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        if np.abs(new - pi).sum() < tol:
            return dict(zip(ids, new.tolist()))
        pi = new
    raise NoConvergence(f"PageRank did not converge within {max_iter} iterations (tol={tol})")


def straightness(net: ShippingNetwork, points: dict | None = None) -> dict:
    """Mean ratio of great-circle to network path length (both in km).

    Network edges cost the haversine distance between their endpoints;
    unreachable destinations contribute zero.
    """
    if points is None:
        points = {p.id: p.point for p in net.ports.values()}
    adj = {p: [] for p in net.ports}
    for (s, d) in net.edges:
        adj[s].append((d, haversine_km(points[s], points[d])))
    n = len(net.ports)
    out = {}
    for s in net.ports:
        if n < 2:
            out[s] = 0.0
            continue
        dist = shortest_path_lengths(adj, s)
        acc = 0.0
        for t, dn in dist.items():
            if t == s:
                continue
            de = haversine_km(points[s], points[t])
            acc += 1.0 if dn == 0 else de / dn
        out[s] = acc / (n - 1)
    return out


@dataclass
class NodeMetrics:
    betweenness: dict
    closeness: dict
    pagerank: dict
    straightness: dict = field(default_factory=dict)
    betweenness_norm: dict = field(default_factory=dict)


def node_metrics(net: ShippingNetwork, weight_mode: str = "trips", damping: float = 0.85,
                 tol: float = 1e-10, max_iter: int = 1000) -> NodeMetrics:
    bc = betweenness(net, weight_mode)
    n = len(net.ports)
    scale = 1.0 / ((n - 1) * (n - 2)) if n > 2 else 0.0
    return NodeMetrics(
        betweenness=bc,
        closeness=closeness(net, weight_mode),
        pagerank=pagerank(net, damping, tol, max_iter),
        straightness=straightness(net),
        betweenness_norm={k: v * scale for k, v in bc.items()},
    )


# ---------------------------------------------------------------------------
# fully connected network

@dataclass
class CompleteNetwork:
    """Every ordered port pair, columnar. ``real`` marks observed edges."""

    src: list
    dst: list
    real: np.ndarray
    weight: np.ndarray
    haversine_km: np.ndarray
    sea_km: np.ndarray
    edge_importance: np.ndarray
    ports: dict

    def __len__(self):
        return len(self.src)

    def labels(self) -> list:
        return ["real" if r else "pseudo" for r in self.real]

    def subset(self, idx) -> "CompleteNetwork":
        idx = np.asarray(idx, dtype=int)
        return CompleteNetwork(
            src=[self.src[i] for i in idx],
            dst=[self.dst[i] for i in idx],
            real=self.real[idx],
            weight=self.weight[idx],
            haversine_km=self.haversine_km[idx],
            sea_km=self.sea_km[idx],
            edge_importance=self.edge_importance[idx],
            ports=self.ports,
        )


def make_complete(net: ShippingNetwork, pseudo_weight: float = DEFAULT_PSEUDO_WEIGHT,
                  provider: DistanceProvider | None = None) -> CompleteNetwork:
    if not pseudo_weight > 0:
        raise ValueError("pseudo_weight must be positive")
    provider = provider or DistanceProvider()
    src, dst, real, weight, hav, sea = [], [], [], [], [], []
    for a, pa in net.ports.items():
        for b, pb in net.ports.items():
            if a == b:
                continue
            w = net.edges.get((a, b))
            src.append(a)
            dst.append(b)
            real.append(w is not None)
            weight.append(w if w is not None else pseudo_weight)
            hav.append(haversine_km(pa.point, pb.point))
            sea.append(sea_distance_km(provider, a, b, pa.point, pb.point))
    m = len(src)
    return CompleteNetwork(
        src=src, dst=dst,
        real=np.array(real, dtype=bool),
        weight=np.array(weight, dtype=float),
        haversine_km=np.array(hav, dtype=float),
        sea_km=np.array(sea, dtype=float),
        edge_importance=np.full(m, np.nan),
        ports=net.ports,
    )


def _minmax(x: np.ndarray, what: str) -> np.ndarray:
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        raise DegenerateRange(f"cannot min-max normalize {what}: all values equal {lo}")
    return (x - lo) / (hi - lo)


def importance(w_norm, d_norm, epsilon: float = 1e-12):
    """Normalized flow over normalized great-circle distance."""
    return np.asarray(w_norm, dtype=float) / (np.asarray(d_norm, dtype=float) + epsilon)


def edge_importance(cn: CompleteNetwork, epsilon: float = 1e-12) -> CompleteNetwork:
    if len(cn) == 0:
        return cn
    w = _minmax(cn.weight, "weights")
    d = _minmax(cn.haversine_km, "distances")
    return replace(cn, edge_importance=importance(w, d, epsilon))


def _allocate(total: int, sizes: dict) -> dict:
    """Largest-remainder proportional allocation of ``total`` across strata."""
    pool = sum(sizes.values())
    exact = {k: total * v / pool for k, v in sizes.items()}
    alloc = {k: int(np.floor(e)) for k, e in exact.items()}
    left = total - sum(alloc.values())
    by_rem = sorted(sizes, key=lambda k: (-(exact[k] - alloc[k]), k))
    for k in by_rem[:left]:
        alloc[k] += 1
    return alloc


def stratified_sample_pseudo(cn: CompleteNetwork, seed: int) -> CompleteNetwork:
    """All real pairs plus an equal number of pseudo pairs, stratified by the
    region of the source port."""
    real_idx = np.flatnonzero(cn.real)
    pseudo_idx = np.flatnonzero(~cn.real)
    if len(real_idx) == 0 or len(pseudo_idx) == 0:
        raise InsufficientPseudo("need at least one real and one pseudo pair")
    if len(pseudo_idx) < len(real_idx):
        raise InsufficientPseudo(f"{len(pseudo_idx)} pseudo pairs < {len(real_idx)} real pairs")
    strata = {}
    for i in pseudo_idx:
        strata.setdefault(cn.ports[cn.src[i]].region, []).append(i)
    alloc = _allocate(len(real_idx), {k: len(v) for k, v in strata.items()})
    rng = np.random.default_rng(seed)
    picked = []
    for key in sorted(strata):
        members = np.array(strata[key])
        k = min(alloc[key], len(members))
        if k:
            picked.extend(rng.choice(members, size=k, replace=False).tolist())
    idx = np.sort(np.concatenate([real_idx, np.array(picked, dtype=int)]))
    return cn.subset(idx)
