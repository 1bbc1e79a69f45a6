import math

import pytest

from cenergy.geodesy import (
    EARTH_RADIUS,
    LAT_MAX,
    GeoBBox,
    GeoPoint,
    MercatorPoint,
    bbox_of_ring,
    bbox_union,
    from_mercator,
    to_mercator,
)

HALF_WORLD = 20037508.342789244  # R * pi


def test_origin_maps_to_origin():
    p = to_mercator(GeoPoint(0.0, 0.0))
    assert p.x == 0.0
    assert abs(p.y) < 1e-9


def test_antimeridian_x():
    p = to_mercator(GeoPoint(180.0, 0.0))
    assert p.x == pytest.approx(HALF_WORLD, abs=1e-6)
    assert abs(p.y) < 1e-6


def test_lat_max_y_equals_half_world():
    p = to_mercator(GeoPoint(0.0, LAT_MAX))
    assert p.x == 0.0
    # LAT_MAX is quoted to 8 decimals, so y matches R*pi to sub-mm only
    assert p.y == pytest.approx(HALF_WORLD, abs=1e-3)


def test_pole_clamps_to_lat_max():
    assert to_mercator(GeoPoint(0.0, 90.0)) == to_mercator(GeoPoint(0.0, LAT_MAX))
    assert to_mercator(GeoPoint(0.0, -90.0)) == to_mercator(GeoPoint(0.0, -LAT_MAX))


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        to_mercator(GeoPoint(float("nan"), 0.0))
    with pytest.raises(ValueError):
        from_mercator(MercatorPoint(float("inf"), 0.0))


def test_from_mercator_inverse():
    p = from_mercator(MercatorPoint(HALF_WORLD, 0.0))
    assert p.lon == pytest.approx(180.0, abs=1e-9)
    assert p.lat == pytest.approx(0.0, abs=1e-9)
    assert from_mercator(MercatorPoint(0.0, 0.0)) == GeoPoint(0.0, 0.0)


def test_round_trip_grid_sweep():
    for lon in range(-180, 181, 5):
        for lat in range(-85, 86, 5):
            p = GeoPoint(float(lon), float(lat))
            q = from_mercator(to_mercator(p))
            assert abs(q.lon - p.lon) < 1e-9
            assert abs(q.lat - p.lat) < 1e-9


def test_monotonicity():
    xs = [to_mercator(GeoPoint(lon, 17.0)).x for lon in range(-170, 171, 10)]
    assert all(a < b for a, b in zip(xs, xs[1:]))
    ys = [to_mercator(GeoPoint(17.0, lat)).y for lat in range(-84, 85, 4)]
    assert all(a < b for a, b in zip(ys, ys[1:]))


def test_bbox_of_ring_min_max():
    ring = [GeoPoint(0, 0), GeoPoint(2, 1), GeoPoint(1, 3)]
    box = bbox_of_ring(ring)
    assert (box.west, box.south, box.east, box.north) == (0, 0, 2, 3)
    assert all(box.contains(p) for p in ring)


def test_bbox_of_ring_too_few_points():
    with pytest.raises(ValueError):
        bbox_of_ring([GeoPoint(0, 0), GeoPoint(1, 1)])


def test_bbox_of_ring_degenerate_collinear():
    with pytest.raises(ValueError):
        bbox_of_ring([GeoPoint(0, 0), GeoPoint(1, 0), GeoPoint(2, 0)])


def test_bbox_of_ring_antimeridian_rejected():
    ring = [GeoPoint(-179, 0), GeoPoint(179, 1), GeoPoint(0, 2)]
    with pytest.raises(ValueError, match="antimeridian"):
        bbox_of_ring(ring)


def test_bbox_union():
    a = GeoBBox(0, 0, 1, 1)
    b = GeoBBox(0.5, -1, 2, 0.5)
    u = bbox_union([a, b])
    assert (u.west, u.south, u.east, u.north) == (0, -1, 2, 1)
    with pytest.raises(ValueError):
        bbox_union([])


def test_earth_radius_constant():
    assert EARTH_RADIUS == 6378137.0
    assert math.isclose(EARTH_RADIUS * math.pi, HALF_WORLD)
