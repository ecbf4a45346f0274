"""CSV tables exchanged between pipeline stages.

Every file has a fixed header; readers check it verbatim and report the
offending line and column for malformed values. Floats are written in
shortest round-trip form so re-reading a file reproduces it exactly.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .bwra import EnvProfile
from .errors import BadNumber, SchemaMismatch
from .geo import GeoPoint
from .shipnet import Port, Trip

SCHEMAS = {
    "ports": ("port_id", "name", "lat", "lon", "country", "region"),
    "trips": ("year", "src_port", "dst_port", "trips"),
    "trade": ("origin_country", "dest_country", "year", "usd_volume"),
    "env": ("port_id", "temp_min_c", "temp_max_c", "temp_annual_c", "salinity_psu"),
    "searoutes": ("src_port", "dst_port", "km"),
    "network_edges": ("src", "dst", "weight"),
    "metrics": ("port_id", "betweenness", "closeness", "pagerank", "straightness", "betweenness_norm"),
    "complete_edges": ("src", "dst", "label", "weight", "haversine_km", "sea_km", "edge_importance"),
    "predicted_links": ("src", "dst", "probability", "label"),
    "flows_pred": ("src_port", "dest_region", "y_true", "y_pred"),
    "history": ("model", "fold", "epoch", "train_loss", "val_cpc", "lr", "lr_reduced"),
    "risk_distribution": ("bin_low", "bin_high", "mass", "provenance"),
}

# column -> parser; anything not listed is kept as a string
_FLOAT_COLS = {
    "lat", "lon", "trips", "usd_volume", "temp_min_c", "temp_max_c", "temp_annual_c", "salinity_psu",
    "km", "weight", "betweenness", "closeness", "pagerank", "straightness", "betweenness_norm",
    "haversine_km", "sea_km", "edge_importance", "probability", "y_true", "y_pred", "train_loss",
    "val_cpc", "lr", "bin_low", "bin_high", "mass",
}
_INT_COLS = {"year", "fold", "epoch", "lr_reduced"}


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path, kind: str, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCHEMAS[kind])
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path, kind: str) -> list:
    """Rows as dicts with numeric columns parsed."""
    header = list(SCHEMAS[kind])
    path = Path(path)
    if not path.exists():
        raise SchemaMismatch(f"missing input file {path}", path=str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            missing = [c for c in header if got is None or c not in got]
            raise SchemaMismatch(f"{path.name}: expected header {header}, got {got}", path=str(path), line=1,
                                 column=missing[0] if missing else None)
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaMismatch(f"{path.name}:{lineno}: expected {len(header)} fields, got {len(row)}",
                                     path=str(path), line=lineno)
            rec = {}
            for col, raw in zip(header, row):
                if col in _FLOAT_COLS:
                    try:
                        val = float(raw)
                    except ValueError:
                        raise BadNumber(f"{path.name}:{lineno}: column {col!r} is not a number: {raw!r}",
                                        path=str(path), line=lineno, column=col) from None
                    if not math.isfinite(val):
                        raise BadNumber(f"{path.name}:{lineno}: column {col!r} is not finite",
                                        path=str(path), line=lineno, column=col)
                    rec[col] = val
                elif col in _INT_COLS:
                    try:
                        rec[col] = int(raw)
                    except ValueError:
                        raise BadNumber(f"{path.name}:{lineno}: column {col!r} is not an integer: {raw!r}",
                                        path=str(path), line=lineno, column=col) from None
                else:
                    rec[col] = raw
            rec["_line"] = lineno
            out.append(rec)
    return out


def _bad(path, rec, col, msg):
    return BadNumber(f"{Path(path).name}:{rec['_line']}: {msg}", path=str(path), line=rec["_line"], column=col)


def load_ports(path) -> list:
    ports, seen = [], set()
    for r in read_table(path, "ports"):
        if not -90.0 <= r["lat"] <= 90.0:
            raise _bad(path, r, "lat", f"latitude {r['lat']} outside [-90, 90]")
        if r["port_id"] in seen:
            raise SchemaMismatch(f"duplicate port id {r['port_id']!r}", path=str(path), line=r["_line"],
                                 column="port_id")
        seen.add(r["port_id"])
        ports.append(Port(r["port_id"], r["name"], GeoPoint(r["lat"], r["lon"]), r["country"], r["region"]))
    return ports


def load_trips(path) -> list:
    trips = []
    for r in read_table(path, "trips"):
        if not r["trips"] > 0:
            raise _bad(path, r, "trips", f"trip count must be positive, got {r['trips']}")
        trips.append(Trip(r["year"], r["src_port"], r["dst_port"], r["trips"]))
    return trips


def load_trade(path) -> dict:
    trade = {}
    for r in read_table(path, "trade"):
        if r["usd_volume"] < 0:
            raise _bad(path, r, "usd_volume", "trade volume must be >= 0")
        trade[(r["origin_country"], r["dest_country"], r["year"])] = r["usd_volume"]
    return trade


def load_env(path) -> dict:
    env = {}
    for r in read_table(path, "env"):
        try:
            env[r["port_id"]] = EnvProfile(r["temp_min_c"], r["temp_max_c"], r["temp_annual_c"], r["salinity_psu"])
        except ValueError as e:
            raise _bad(path, r, "temp_annual_c", str(e)) from None
    return env


def load_searoutes(path) -> dict:
    table = {}
    for r in read_table(path, "searoutes"):
        if r["km"] < 0:
            raise _bad(path, r, "km", "distance must be >= 0")
        table[(r["src_port"], r["dst_port"])] = r["km"]
    return table


def load_predicted_links(path, only_real: bool = True) -> list:
    rows = read_table(path, "predicted_links")
    return [(r["src"], r["dst"]) for r in rows if not only_real or r["label"] == "1"]


def ports_rows(ports):
    return [(p.id, p.name, p.point.lat, p.point.lon, p.country, p.region) for p in ports]


def trips_rows(trips):
    return [(t.year, t.src, t.dst, t.trips) for t in trips]


def trade_rows(trade: dict):
    return [(a, b, y, v) for (a, b, y), v in sorted(trade.items())]


def env_rows(env: dict):
    return [(pid, *(float(x) for x in (p.as_array() if isinstance(p, EnvProfile) else p))) for pid, p in env.items()]


def searoutes_rows(table: dict):
    return [(a, b, km) for (a, b), km in table.items()]
