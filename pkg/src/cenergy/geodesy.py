"""WGS84 <-> spherical Web Mercator (EPSG:3857) transforms and bbox helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

# WGS84 semi-major axis, meters (spherical Web Mercator uses it as the
# single sphere radius).
EARTH_RADIUS = 6378137.0

# Latitude at which Web Mercator y equals R*pi; inputs are clamped here.
LAT_MAX = 85.05112878


@dataclass(frozen=True)
class GeoPoint:
    """Geographic coordinate in degrees (EPSG:4326), lon east / lat north."""

    lon: float
    lat: float


@dataclass(frozen=True)
class MercatorPoint:
    """Projected coordinate in Web Mercator meters (EPSG:3857)."""

    x: float
    y: float


@dataclass(frozen=True)
class GeoBBox:
    """Axis-aligned geographic bounding box, degrees."""

    west: float
    south: float
    east: float
    north: float

    def contains(self, p: GeoPoint) -> bool:
        return self.west <= p.lon <= self.east and self.south <= p.lat <= self.north

    @property
    def area(self) -> float:
        """Area in square degrees."""
        return (self.east - self.west) * (self.north - self.south)


def to_mercator(p: GeoPoint) -> MercatorPoint:
    """Project a geographic point to Web Mercator meters.

    Latitude is clamped to [-LAT_MAX, +LAT_MAX] before projection so the
    transform is total over valid geographic inputs.
    """
    if not (math.isfinite(p.lon) and math.isfinite(p.lat)):
        raise ValueError(f"non-finite coordinate: ({p.lon}, {p.lat})")
    lat = max(-LAT_MAX, min(LAT_MAX, p.lat))
    x = EARTH_RADIUS * math.radians(p.lon)
    y = EARTH_RADIUS * math.log(math.tan(math.pi / 4.0 + math.radians(lat) / 2.0))
    return MercatorPoint(x, y)


def from_mercator(p: MercatorPoint) -> GeoPoint:
    """Inverse Web Mercator projection, back to degrees."""
    if not (math.isfinite(p.x) and math.isfinite(p.y)):
        raise ValueError(f"non-finite coordinate: ({p.x}, {p.y})")
    lon = math.degrees(p.x / EARTH_RADIUS)
    lat = math.degrees(2.0 * math.atan(math.exp(p.y / EARTH_RADIUS)) - math.pi / 2.0)
    return GeoPoint(lon, lat)


def bbox_of_ring(ring: Sequence[GeoPoint]) -> GeoBBox:
    """Componentwise min/max bbox of a polygon ring.

    Rejects rings with fewer than 3 points, degenerate (zero-width or
    zero-height) extents, and antimeridian-spanning extents.
    """
    if len(ring) < 3:
        raise ValueError(f"ring needs >= 3 points, got {len(ring)}")
    west = min(p.lon for p in ring)
    east = max(p.lon for p in ring)
    south = min(p.lat for p in ring)
    north = max(p.lat for p in ring)
    if east - west > 180.0:
        raise ValueError("bbox spans the antimeridian (east - west > 180 deg)")
    if west >= east or south >= north:
        raise ValueError("degenerate ring: zero-width or zero-height bbox")
    return GeoBBox(west=west, south=south, east=east, north=north)


def bbox_union(boxes: Iterable[GeoBBox]) -> GeoBBox:
    """Smallest bbox containing every input bbox."""
    boxes = list(boxes)
    if not boxes:
        raise ValueError("empty bbox sequence")
    return GeoBBox(
        west=min(b.west for b in boxes),
        south=min(b.south for b in boxes),
        east=max(b.east for b in boxes),
        north=max(b.north for b in boxes),
    )
