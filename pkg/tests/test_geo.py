import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seaflow.errors import MissingPair
from seaflow.geo import (EARTH_RADIUS_KM, DistanceProvider, GeoPoint, haversine_km, haversine_matrix,
                         sea_distance_km, spherical_centroid)

lats = st.floats(-90, 90, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)


def test_identity():
    assert haversine_km(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0


def test_antipodal():
    assert abs(haversine_km(GeoPoint(90, 0), GeoPoint(-90, 0)) - 20015.087) < 1e-3
    assert abs(math.pi * EARTH_RADIUS_KM - 20015.087) < 1e-3


def test_quarter_circle():
    assert abs(haversine_km(GeoPoint(0, 0), GeoPoint(0, 90)) - 10007.543) < 1e-3


def test_longitude_normalized():
    assert GeoPoint(0, 180).lon == 180.0
    assert GeoPoint(0, -180).lon == 180.0
    assert GeoPoint(0, 190).lon == pytest.approx(-170.0)
    with pytest.raises(ValueError):
        GeoPoint(95, 0)


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_symmetric_and_bounded(a, b):
    d = haversine_km(a, b)
    assert d == pytest.approx(haversine_km(b, a), abs=1e-9)
    assert 0.0 <= d <= math.pi * EARTH_RADIUS_KM + 1e-9


@settings(max_examples=200, deadline=None)
@given(points, points, points)
def test_triangle_inequality(a, b, c):
    ab, bc, ac = haversine_km(a, b), haversine_km(b, c), haversine_km(a, c)
    assert ac <= (ab + bc) * (1 + 1e-9) + 1e-9


def test_matrix_matches_pairwise(rng):
    lat = rng.uniform(-80, 80, 6)
    lon = rng.uniform(-180, 180, 6)
    M = haversine_matrix(lat, lon)
    for i in range(6):
        for j in range(6):
            assert M[i, j] == pytest.approx(haversine_km(GeoPoint(lat[i], lon[i]), GeoPoint(lat[j], lon[j])),
                                            abs=1e-6)


def test_centroid_of_symmetric_pair():
    c = spherical_centroid([GeoPoint(0, -10), GeoPoint(0, 10)])
    assert c.lat == pytest.approx(0.0, abs=1e-12)
    assert c.lon == pytest.approx(0.0, abs=1e-12)


def test_providers():
    a, b = GeoPoint(0, 0), GeoPoint(0, 90)
    assert sea_distance_km(DistanceProvider(), "a", "b", a, b) == haversine_km(a, b)
    scaled = DistanceProvider(mode="haversine_scaled", factor=1.0)
    assert sea_distance_km(scaled, "a", "b", a, b) == pytest.approx(10007.543, abs=1e-3)
    scaled = DistanceProvider(mode="haversine_scaled", factor=1.3)
    assert sea_distance_km(scaled, "a", "b", a, b) >= haversine_km(a, b)
    table = DistanceProvider(mode="table", table={("a", "b"): 123.0})
    assert sea_distance_km(table, "a", "b", a, b) == 123.0
    with pytest.raises(MissingPair):
        sea_distance_km(table, "b", "a", b, a)


def test_provider_from_csv(tmp_path):
    p = tmp_path / "searoutes.csv"
    p.write_text("src_port,dst_port,km\na,b,10.5\n")
    prov = DistanceProvider.from_csv(p)
    assert sea_distance_km(prov, "a", "b", GeoPoint(0, 0), GeoPoint(1, 1)) == 10.5


@settings(max_examples=100, deadline=None)
@given(points, points, st.floats(1.0, 3.0))
def test_scaled_not_shorter(a, b, f):
    prov = DistanceProvider(mode="haversine_scaled", factor=f)
    assert sea_distance_km(prov, "x", "y", a, b) >= haversine_km(a, b)
