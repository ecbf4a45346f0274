import sys
import numpy as np
import pytest

from seaflow.geo import GeoPoint
from seaflow.shipnet import Port, Trip, build_network


def make_ports(coords, regions=None, countries=None):
    """Ports named p0, p1, ... at the given (lat, lon) pairs."""
    out = []
    for i, (lat, lon) in enumerate(coords):
        reg = regions[i] if regions else "R0"
        cty = countries[i] if countries else f"C{i}"
        out.append(Port(f"p{i}", f"port {i}", GeoPoint(lat, lon), cty, reg))
    return out


def make_net(n, edges, coords=None, regions=None):
    """Network over ``n`` ports from ``(i, j, w)`` triples."""
    if coords is None:
        coords = [(0.0, 10.0 * i) for i in range(n)]
    ports = make_ports(coords, regions)
    trips = [Trip(2019, f"p{i}", f"p{j}", float(w)) for i, j, w in edges]
    return build_network(trips, ports)


def num_grad(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines at the end of the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
