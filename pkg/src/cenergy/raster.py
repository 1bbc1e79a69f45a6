"""Single-band GeoTIFF decoding and bilinear elevation sampling.

Supports the subset of GeoTIFF that COP30 exports actually use: classic
TIFF (both byte orders), one band of int16 or float32 samples, strip or
tile layout, no compression or deflate, with ModelPixelScale and
ModelTiepoint georeferencing and an optional GDAL nodata sentinel.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cenergy.geodesy import GeoPoint, MercatorPoint, to_mercator


class GeoTiffError(ValueError):
    """Raised for malformed or unsupported GeoTIFF input."""


# TIFF tag ids
_TAG_WIDTH = 256
_TAG_HEIGHT = 257
_TAG_BITS_PER_SAMPLE = 258
_TAG_COMPRESSION = 259
_TAG_STRIP_OFFSETS = 273
_TAG_SAMPLES_PER_PIXEL = 277
_TAG_ROWS_PER_STRIP = 278
_TAG_STRIP_BYTE_COUNTS = 279
_TAG_TILE_WIDTH = 322
_TAG_TILE_LENGTH = 323
_TAG_TILE_OFFSETS = 324
_TAG_TILE_BYTE_COUNTS = 325
_TAG_SAMPLE_FORMAT = 339
_TAG_MODEL_PIXEL_SCALE = 33550
_TAG_MODEL_TIEPOINT = 33922
_TAG_GDAL_NODATA = 42113

_COMPRESSION_NONE = 1
_COMPRESSION_DEFLATE_ADOBE = 8
_COMPRESSION_DEFLATE_LEGACY = 32946

# TIFF field type -> (struct code, byte size)
_FIELD_TYPES = {
    1: ("B", 1),   # BYTE
    2: ("s", 1),   # ASCII
    3: ("H", 2),   # SHORT
    4: ("I", 4),   # LONG
    5: ("II", 8),  # RATIONAL
    11: ("f", 4),  # FLOAT
    12: ("d", 8),  # DOUBLE
}


@dataclass(frozen=True)
class DemGrid:
    """Row-major single-band elevation raster in geographic coordinates.

    lon0/lat0 are the *center* of pixel (0, 0); rows proceed north to
    south (dlat > 0), columns west to east (dlon > 0).
    """

    lon0: float
    lat0: float
    dlon: float
    dlat: float
    rows: int
    cols: int
    values: np.ndarray  # float32, shape (rows, cols)
    nodata: Optional[float] = None

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.rows}x{self.cols}")
        if self.dlon <= 0 or self.dlat <= 0:
            raise ValueError("pixel scale must be positive")
        if self.values.shape != (self.rows, self.cols):
            raise ValueError("values shape does not match rows x cols")

    def valid_mask(self) -> np.ndarray:
        """Boolean mask of pixels carrying a real elevation."""
        if self.nodata is None:
            return np.ones((self.rows, self.cols), dtype=bool)
        return self.values != np.float32(self.nodata)

    def is_valid(self, row: int, col: int) -> bool:
        if self.nodata is None:
            return True
        return self.values[row, col] != np.float32(self.nodata)

    def pixel_center(self, row: int, col: int) -> GeoPoint:
        return GeoPoint(self.lon0 + col * self.dlon, self.lat0 - row * self.dlat)


def _read_ifd_value(data: bytes, endian: str, type_id: int, count: int, raw: bytes):
    if type_id not in _FIELD_TYPES:
        raise GeoTiffError(f"unsupported TIFF field type {type_id}")
    code, size = _FIELD_TYPES[type_id]
    total = size * count
    if total <= 4:
        payload = raw[:total]
    else:
        (offset,) = struct.unpack(endian + "I", raw)
        if offset + total > len(data):
            raise GeoTiffError("TIFF tag value out of bounds")
        payload = data[offset:offset + total]
    if type_id == 2:  # ASCII, NUL-terminated
        return payload.rstrip(b"\x00").decode("ascii", errors="replace")
    if type_id == 5:  # RATIONAL
        nums = struct.unpack(endian + "I" * (2 * count), payload)
        return tuple(nums[i] / nums[i + 1] for i in range(0, len(nums), 2))
    vals = struct.unpack(endian + code * count, payload)
    return vals[0] if count == 1 else vals


def _parse_tags(data: bytes) -> tuple[str, dict]:
    if len(data) < 8:
        raise GeoTiffError("not a TIFF: truncated header")
    if data[:2] == b"II":
        endian = "<"
    elif data[:2] == b"MM":
        endian = ">"
    else:
        raise GeoTiffError("not a TIFF: bad byte-order mark")
    (magic,) = struct.unpack(endian + "H", data[2:4])
    if magic == 43:
        raise GeoTiffError("BigTIFF is not supported")
    if magic != 42:
        raise GeoTiffError("not a TIFF: bad magic number")
    (ifd_offset,) = struct.unpack(endian + "I", data[4:8])
    if ifd_offset + 2 > len(data):
        raise GeoTiffError("truncated IFD")
    (n_entries,) = struct.unpack(endian + "H", data[ifd_offset:ifd_offset + 2])
    tags = {}
    pos = ifd_offset + 2
    for _ in range(n_entries):
        if pos + 12 > len(data):
            raise GeoTiffError("truncated IFD entry")
        tag, type_id, count = struct.unpack(endian + "HHI", data[pos:pos + 8])
        tags[tag] = _read_ifd_value(data, endian, type_id, count, data[pos + 8:pos + 12])
        pos += 12
    return endian, tags


def _as_tuple(v) -> tuple:
    return v if isinstance(v, tuple) else (v,)


def _decompress(chunk: bytes, compression: int, expected: int) -> bytes:
    if compression == _COMPRESSION_NONE:
        out = chunk
    elif compression in (_COMPRESSION_DEFLATE_ADOBE, _COMPRESSION_DEFLATE_LEGACY):
        try:
            out = zlib.decompress(chunk)
        except zlib.error as e:
            raise GeoTiffError(f"bad deflate stream: {e}") from e
    else:
        raise GeoTiffError(f"unsupported compression {compression}")
    if len(out) < expected:
        raise GeoTiffError("truncated strip or tile data")
    return out[:expected]


def decode_geotiff(data: bytes) -> DemGrid:
    """Decode GeoTIFF bytes into a DemGrid.

    int16 samples are widened to float32; the nodata sentinel, when
    declared, is carried through unchanged.
    """
    endian, tags = _parse_tags(data)

    width = tags.get(_TAG_WIDTH)
    height = tags.get(_TAG_HEIGHT)
    if not width or not height:
        raise GeoTiffError("missing image dimensions")
    samples = tags.get(_TAG_SAMPLES_PER_PIXEL, 1)
    if samples != 1:
        raise GeoTiffError(f"unsupported band count {samples}")

    bits = tags.get(_TAG_BITS_PER_SAMPLE, 1)
    fmt = tags.get(_TAG_SAMPLE_FORMAT, 1)
    if (bits, fmt) == (16, 2):
        dtype = np.dtype(endian + "i2")
    elif (bits, fmt) == (32, 3):
        dtype = np.dtype(endian + "f4")
    else:
        raise GeoTiffError(f"unsupported sample type: {bits}-bit format {fmt}")

    compression = tags.get(_TAG_COMPRESSION, _COMPRESSION_NONE)

    if _TAG_MODEL_PIXEL_SCALE not in tags or _TAG_MODEL_TIEPOINT not in tags:
        raise GeoTiffError("missing georeferencing tags (ModelPixelScale/ModelTiepoint)")
    scale = _as_tuple(tags[_TAG_MODEL_PIXEL_SCALE])
    tie = _as_tuple(tags[_TAG_MODEL_TIEPOINT])
    if len(scale) < 2 or len(tie) < 6:
        raise GeoTiffError("malformed georeferencing tags")
    dlon, dlat = float(scale[0]), float(scale[1])
    # Tiepoint maps raster point (tie[0], tie[1]) — pixel *corners* — to
    # geographic (tie[3], tie[4]); shift by half a pixel to centers.
    tie_lon = float(tie[3]) - tie[0] * dlon
    tie_lat = float(tie[4]) + tie[1] * dlat

    nodata = None
    if _TAG_GDAL_NODATA in tags:
        try:
            nodata = float(str(tags[_TAG_GDAL_NODATA]).strip())
        except ValueError as e:
            raise GeoTiffError(f"bad GDAL nodata value: {e}") from e

    bytes_per_px = bits // 8
    if _TAG_TILE_OFFSETS in tags:
        grid = _read_tiles(data, tags, endian, width, height, dtype, bytes_per_px, compression)
    elif _TAG_STRIP_OFFSETS in tags:
        grid = _read_strips(data, tags, width, height, dtype, bytes_per_px, compression)
    else:
        raise GeoTiffError("no strip or tile offsets present")

    values = grid.astype(np.float32)
    return DemGrid(
        lon0=tie_lon + dlon / 2.0,
        lat0=tie_lat - dlat / 2.0,
        dlon=dlon,
        dlat=dlat,
        rows=height,
        cols=width,
        values=values,
        nodata=nodata,
    )


def _read_strips(data, tags, width, height, dtype, bpp, compression) -> np.ndarray:
    offsets = _as_tuple(tags[_TAG_STRIP_OFFSETS])
    counts = _as_tuple(tags.get(_TAG_STRIP_BYTE_COUNTS, ()))
    if len(counts) != len(offsets):
        raise GeoTiffError("strip offsets/byte-counts mismatch")
    rows_per_strip = tags.get(_TAG_ROWS_PER_STRIP, height)
    out = np.empty((height, width), dtype=dtype)
    row = 0
    for off, cnt in zip(offsets, counts):
        if off + cnt > len(data):
            raise GeoTiffError("truncated strip data")
        n_rows = min(rows_per_strip, height - row)
        raw = _decompress(data[off:off + cnt], compression, n_rows * width * bpp)
        out[row:row + n_rows] = np.frombuffer(raw, dtype=dtype).reshape(n_rows, width)
        row += n_rows
    if row != height:
        raise GeoTiffError("strip data does not cover the image")
    return out


def _read_tiles(data, tags, endian, width, height, dtype, bpp, compression) -> np.ndarray:
    tw = tags.get(_TAG_TILE_WIDTH)
    th = tags.get(_TAG_TILE_LENGTH)
    if not tw or not th:
        raise GeoTiffError("tiled layout missing tile dimensions")
    offsets = _as_tuple(tags[_TAG_TILE_OFFSETS])
    counts = _as_tuple(tags.get(_TAG_TILE_BYTE_COUNTS, ()))
    if len(counts) != len(offsets):
        raise GeoTiffError("tile offsets/byte-counts mismatch")
    tiles_across = math.ceil(width / tw)
    tiles_down = math.ceil(height / th)
    if len(offsets) != tiles_across * tiles_down:
        raise GeoTiffError("tile count mismatch")
    out = np.empty((height, width), dtype=dtype)
    for idx, (off, cnt) in enumerate(zip(offsets, counts)):
        if off + cnt > len(data):
            raise GeoTiffError("truncated tile data")
        raw = _decompress(data[off:off + cnt], compression, tw * th * bpp)
        tile = np.frombuffer(raw, dtype=dtype).reshape(th, tw)
        ty, tx = divmod(idx, tiles_across)
        r0, c0 = ty * th, tx * tw
        r1, c1 = min(r0 + th, height), min(c0 + tw, width)
        out[r0:r1, c0:c1] = tile[: r1 - r0, : c1 - c0]
    return out


def sample_bilinear(grid: DemGrid, p: GeoPoint) -> Optional[float]:
    """Bilinear elevation at p, or None.

    None when p falls outside the pixel-center envelope or when any of
    the 4 surrounding pixels is nodata.
    """
    col_f = (p.lon - grid.lon0) / grid.dlon
    row_f = (grid.lat0 - p.lat) / grid.dlat
    # snap near-integer positions so pixel-center queries are exact
    if abs(col_f - round(col_f)) < 1e-9:
        col_f = float(round(col_f))
    if abs(row_f - round(row_f)) < 1e-9:
        row_f = float(round(row_f))
    if col_f < 0 or col_f > grid.cols - 1 or row_f < 0 or row_f > grid.rows - 1:
        return None
    c0 = min(int(math.floor(col_f)), grid.cols - 2)
    r0 = min(int(math.floor(row_f)), grid.rows - 2)
    fx = col_f - c0
    fy = row_f - r0
    corners = grid.values[r0:r0 + 2, c0:c0 + 2]
    if grid.nodata is not None and np.any(corners == np.float32(grid.nodata)):
        return None
    v00, v01 = float(corners[0, 0]), float(corners[0, 1])
    v10, v11 = float(corners[1, 0]), float(corners[1, 1])
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


def grid_vertex_mercator(grid: DemGrid, row: int, col: int) -> tuple[MercatorPoint, float]:
    """Mercator-projected pixel center paired with its elevation."""
    if not (0 <= row < grid.rows and 0 <= col < grid.cols):
        raise IndexError(f"pixel ({row}, {col}) out of range for {grid.rows}x{grid.cols} grid")
    return to_mercator(grid.pixel_center(row, col)), float(grid.values[row, col])
