"""Spherical geometry and port-to-port distance providers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadNumber, MissingPair, SchemaMismatch

EARTH_RADIUS_KM = 6371.0


def _normalize_lon(lon: float) -> float:
    lon = math.fmod(lon, 360.0)
    if lon > 180.0:
        lon -= 360.0
    elif lon <= -180.0:
        lon += 360.0
    return lon


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", _normalize_lon(lon))

    def unit_vector(self) -> np.ndarray:
        phi, lam = math.radians(self.lat), math.radians(self.lon)
        return np.array([math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)])


def haversine_km(a: GeoPoint, b: GeoPoint, radius: float = EARTH_RADIUS_KM) -> float:
    """Great-circle distance in kilometers."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    # rounding can push h a hair past 1 for antipodes
    return 2.0 * radius * math.asin(math.sqrt(min(1.0, max(0.0, h))))


def haversine_matrix(lat, lon, radius: float = EARTH_RADIUS_KM) -> np.ndarray:
    """Pairwise haversine distances for coordinate arrays in degrees."""
    phi = np.radians(np.asarray(lat, dtype=float))
    lam = np.radians(np.asarray(lon, dtype=float))
    dphi = phi[None, :] - phi[:, None]
    dlam = lam[None, :] - lam[:, None]
    h = np.sin(dphi / 2) ** 2 + np.cos(phi)[:, None] * np.cos(phi)[None, :] * np.sin(dlam / 2) ** 2
    return 2.0 * radius * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def spherical_centroid(points) -> GeoPoint:
    """Unweighted mean of points on the sphere, projected back to the surface.

    Falls back to the first point when the mean vector vanishes (e.g. an
    antipodal pair), where the centroid is undefined.
    """
    points = list(points)
    if not points:
        raise ValueError("centroid of an empty point set")
    v = np.sum([p.unit_vector() for p in points], axis=0)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        return points[0]
    x, y, z = v / norm
    lat = math.degrees(math.asin(max(-1.0, min(1.0, z))))
    lon = math.degrees(math.atan2(y, x))
    return GeoPoint(lat, lon)


@dataclass
class DistanceProvider:
    """Source of sea distances between ports.

    ``mode`` is ``"haversine"``, ``"haversine_scaled"`` (``factor`` times the
    great-circle distance, factor >= 1) or ``"table"`` (lookup in ``table``
    keyed by ``(src, dst)``).
    """

    mode: str = "haversine"
    factor: float = 1.0
    table: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("haversine", "haversine_scaled", "table"):
            raise ValueError(f"unknown distance mode {self.mode!r}")
        if self.mode == "haversine_scaled" and not self.factor >= 1.0:
            raise ValueError("detour factor must be >= 1")

    @classmethod
    def from_csv(cls, path) -> "DistanceProvider":
        """Load a ``src_port,dst_port,km`` table."""
        table = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["src_port", "dst_port", "km"]:
                raise SchemaMismatch(f"bad header {header}", path=str(path), line=1)
            for lineno, row in enumerate(reader, start=2):
                try:
                    km = float(row[2])
                except (ValueError, IndexError):
                    raise BadNumber(f"bad km value in {row}", path=str(path), line=lineno, column="km")
                if not math.isfinite(km) or km < 0:
                    raise BadNumber(f"km must be finite and >= 0, got {km}", path=str(path), line=lineno, column="km")
                table[(row[0], row[1])] = km
        return cls(mode="table", table=table)


def sea_distance_km(provider: DistanceProvider, src, dst, src_pt: GeoPoint, dst_pt: GeoPoint) -> float:
    if provider.mode == "table":
        try:
            return provider.table[(src, dst)]
        except KeyError:
            raise MissingPair(f"no sea distance for ({src}, {dst})") from None
    d = haversine_km(src_pt, dst_pt)
    if provider.mode == "haversine_scaled":
        return provider.factor * d
    return d
