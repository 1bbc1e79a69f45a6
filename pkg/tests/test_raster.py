import math

import numpy as np
import pytest

from geotiff_writer import write_geotiff

from cenergy.geodesy import GeoPoint, to_mercator
from cenergy.raster import (
    DemGrid,
    GeoTiffError,
    decode_geotiff,
    grid_vertex_mercator,
    sample_bilinear,
)
from conftest import make_grid

VALUES_4X4 = [[float(r * 4 + c) for c in range(4)] for r in range(4)]


def test_decode_float32_fixture():
    data = write_geotiff(VALUES_4X4, dtype="float32", tie_lon=10.0, tie_lat=0.04)
    grid = decode_geotiff(data)
    assert (grid.rows, grid.cols) == (4, 4)
    assert np.array_equal(grid.values, np.array(VALUES_4X4, dtype=np.float32))
    # tiepoint corner -> first pixel center
    assert grid.lon0 == pytest.approx(10.005)
    assert grid.lat0 == pytest.approx(0.035)
    assert grid.nodata is None


def test_decode_not_a_tiff():
    with pytest.raises(GeoTiffError, match="not a TIFF"):
        decode_geotiff(b"")
    with pytest.raises(GeoTiffError, match="not a TIFF"):
        decode_geotiff(b"PNG\x00garbage")


def test_decode_int16_nodata():
    vals = [row[:] for row in VALUES_4X4]
    vals[1][1] = -32768
    data = write_geotiff(vals, dtype="int16", nodata=-32768)
    grid = decode_geotiff(data)
    assert grid.nodata == -32768
    assert grid.values[1, 1] == np.float32(-32768)
    assert not grid.is_valid(1, 1)
    assert grid.is_valid(0, 0)
    assert int(grid.valid_mask().sum()) == 15


@pytest.mark.parametrize("endian", ["<", ">"])
@pytest.mark.parametrize("dtype", ["float32", "int16"])
@pytest.mark.parametrize("compression", ["none", "deflate"])
@pytest.mark.parametrize("layout,kwargs", [
    ("strips", {}),
    ("strips", {"rows_per_strip": 2}),
    ("tiles", {"tile_size": (3, 3)}),
])
def test_decode_encode_identity(endian, dtype, compression, layout, kwargs):
    data = write_geotiff(VALUES_4X4, dtype=dtype, endian=endian,
                         compression=compression, layout=layout, **kwargs)
    grid = decode_geotiff(data)
    assert np.array_equal(grid.values, np.array(VALUES_4X4, dtype=np.float32))


def test_decode_missing_geo_tags():
    data = write_geotiff(VALUES_4X4)
    # stomp the ModelPixelScale tag id (33550) so it becomes unknown
    mutated = data.replace((33550).to_bytes(2, "little"), (50000).to_bytes(2, "little"))
    with pytest.raises(GeoTiffError, match="georeferencing"):
        decode_geotiff(mutated)


def test_decode_truncated():
    data = write_geotiff(VALUES_4X4)
    with pytest.raises(GeoTiffError):
        decode_geotiff(data[: len(data) - 20])


def test_decode_rejects_multiband():
    data = write_geotiff(VALUES_4X4)
    # SamplesPerPixel tag (277) value sits 8 bytes into its entry
    idx = data.find((277).to_bytes(2, "little") + (3).to_bytes(2, "little"))
    assert idx > 0
    mutated = bytearray(data)
    mutated[idx + 8] = 3
    with pytest.raises(GeoTiffError, match="band count"):
        decode_geotiff(bytes(mutated))


def test_sample_at_pixel_center_exact():
    grid = make_grid(VALUES_4X4)
    for r in range(4):
        for c in range(4):
            p = grid.pixel_center(r, c)
            assert sample_bilinear(grid, p) == float(grid.values[r, c])


def test_sample_midpoint_average():
    grid = make_grid([[10.0, 20.0], [10.0, 20.0]])
    p = GeoPoint(grid.lon0 + grid.dlon / 2, grid.lat0)
    assert sample_bilinear(grid, p) == pytest.approx(15.0)


def test_sample_cell_center():
    grid = make_grid([[1.0, 2.0], [3.0, 4.0]])
    p = GeoPoint(grid.lon0 + grid.dlon / 2, grid.lat0 - grid.dlat / 2)
    assert sample_bilinear(grid, p) == pytest.approx(2.5)


def test_sample_outside_envelope():
    grid = make_grid(VALUES_4X4)
    assert sample_bilinear(grid, GeoPoint(grid.lon0 - 0.001, grid.lat0)) is None
    assert sample_bilinear(grid, GeoPoint(grid.lon0, grid.lat0 + 0.001)) is None
    assert sample_bilinear(grid, GeoPoint(grid.lon0 + 3.5 * grid.dlon, grid.lat0)) is None


def test_sample_nodata_corner_absent():
    grid = make_grid([[1.0, -9999.0], [3.0, 4.0]], nodata=-9999.0)
    p = GeoPoint(grid.lon0 + grid.dlon / 2, grid.lat0 - grid.dlat / 2)
    assert sample_bilinear(grid, p) is None
    # the nodata pixel center itself is absent too
    assert sample_bilinear(grid, grid.pixel_center(0, 1)) is None


def test_sample_within_corner_bounds():
    rng = np.random.default_rng(7)
    grid = make_grid(rng.uniform(0, 100, size=(6, 6)))
    for _ in range(200):
        p = GeoPoint(
            grid.lon0 + rng.uniform(0, 5) * grid.dlon,
            grid.lat0 - rng.uniform(0, 5) * grid.dlat,
        )
        z = sample_bilinear(grid, p)
        assert z is not None
        assert float(grid.values.min()) - 1e-9 <= z <= float(grid.values.max()) + 1e-9


def test_grid_vertex_mercator():
    grid = make_grid(VALUES_4X4)
    m, z = grid_vertex_mercator(grid, 0, 0)
    expected = to_mercator(GeoPoint(grid.lon0, grid.lat0))
    assert (m.x, m.y) == (expected.x, expected.y)
    assert z == 0.0

    m, z = grid_vertex_mercator(grid, 2, 1)
    expected = to_mercator(GeoPoint(grid.lon0 + grid.dlon, grid.lat0 - 2 * grid.dlat))
    assert m.x == pytest.approx(expected.x)
    assert m.y == pytest.approx(expected.y)
    assert z == 9.0

    m, z = grid_vertex_mercator(grid, 3, 3)
    assert z == 15.0
    with pytest.raises(IndexError):
        grid_vertex_mercator(grid, 4, 0)
    with pytest.raises(IndexError):
        grid_vertex_mercator(grid, 0, -1)


def test_demgrid_invariants():
    with pytest.raises(ValueError):
        make_grid([[1.0, 2.0]])  # one row
    with pytest.raises(ValueError):
        DemGrid(lon0=0, lat0=0, dlon=-0.01, dlat=0.01, rows=2, cols=2,
                values=np.zeros((2, 2), dtype=np.float32))
