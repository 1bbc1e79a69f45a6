"""Mesh and path construction in Web Mercator meters.

Covers terrain triangulation from an elevation grid, polyline
densification and terrain draping, ear-clipping polygon triangulation,
and prism extrusion of building footprints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from cenergy.geodesy import EARTH_RADIUS, GeoPoint, to_mercator
from cenergy.raster import DemGrid, sample_bilinear

Vertex = Tuple[float, float, float]
Triangle = Tuple[int, int, int]


@dataclass
class TriMesh:
    """Indexed triangle mesh, vertices in Mercator meters."""

    vertices: List[Vertex] = field(default_factory=list)
    triangles: List[Triangle] = field(default_factory=list)

    def validate(self) -> None:
        n = len(self.vertices)
        for v in self.vertices:
            if not all(math.isfinite(c) for c in v):
                raise ValueError(f"non-finite vertex {v}")
        for t in self.triangles:
            a, b, c = t
            if a == b or b == c or a == c:
                raise ValueError(f"degenerate triangle {t}")
            if not (0 <= a < n and 0 <= b < n and 0 <= c < n):
                raise ValueError(f"triangle index out of range: {t} (n={n})")


@dataclass
class Polyline3:
    """3D path in Mercator meters; kind is 'road' or 'power'."""

    points: List[Vertex]
    kind: str = "road"


def grid_mesh(grid: DemGrid) -> TriMesh:
    """Terrain mesh: one vertex per valid pixel at its projected center.

    Each 2x2 pixel cell contributes up to two triangles, split along the
    TL-BR diagonal: (TL, BL, BR) and (TL, BR, TR). A triangle is emitted
    only when all three of its pixels are valid. Vertex indices follow
    row-major scan order over valid pixels.
    """
    if grid.rows < 2 or grid.cols < 2:
        raise ValueError("grid must have at least 2 rows and 2 columns")

    valid = grid.valid_mask()
    rows, cols = grid.rows, grid.cols

    # Vectorized pixel-center projection.
    lons = grid.lon0 + np.arange(cols) * grid.dlon
    lats = grid.lat0 - np.arange(rows) * grid.dlat
    lats = np.clip(lats, -85.05112878, 85.05112878)
    xs = EARTH_RADIUS * np.radians(lons)
    ys = EARTH_RADIUS * np.log(np.tan(np.pi / 4.0 + np.radians(lats) / 2.0))

    index = np.full((rows, cols), -1, dtype=np.int64)
    index[valid] = np.arange(int(valid.sum()))

    vertices: List[Vertex] = []
    vr, vc = np.nonzero(valid)
    z = grid.values.astype(np.float64)
    for r, c in zip(vr.tolist(), vc.tolist()):
        vertices.append((float(xs[c]), float(ys[r]), float(z[r, c])))

    triangles: List[Triangle] = []
    for r in range(rows - 1):
        for c in range(cols - 1):
            tl = index[r, c]
            tr = index[r, c + 1]
            bl = index[r + 1, c]
            br = index[r + 1, c + 1]
            if tl >= 0 and bl >= 0 and br >= 0:
                triangles.append((int(tl), int(bl), int(br)))
            if tl >= 0 and br >= 0 and tr >= 0:
                triangles.append((int(tl), int(br), int(tr)))
    return TriMesh(vertices=vertices, triangles=triangles)


def _mercator_segment_length(a: GeoPoint, b: GeoPoint) -> float:
    """Segment length in Mercator meters (local scale at the segment)."""
    pa = to_mercator(a)
    pb = to_mercator(b)
    return math.hypot(pb.x - pa.x, pb.y - pa.y)


def densify(points: Sequence[GeoPoint], max_step: float) -> List[GeoPoint]:
    """Subdivide each segment into equal parts no longer than max_step.

    Original points are always retained; subdivision interpolates
    linearly in geographic coordinates.
    """
    if max_step <= 0:
        raise ValueError("max_step must be positive")
    if len(points) < 2:
        raise ValueError("need at least 2 points")
    out: List[GeoPoint] = [points[0]]
    for a, b in zip(points, points[1:]):
        length = _mercator_segment_length(a, b)
        n = max(1, math.ceil(length / max_step)) if length > 0 else 1
        for k in range(1, n):
            t = k / n
            out.append(GeoPoint(a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat)))
        out.append(b)
    return out


def drape(points: Sequence[GeoPoint], grid: DemGrid, z_offset: float = 0.0,
          kind: str = "road") -> Optional[Polyline3]:
    """Project points to Mercator with z from the terrain plus an offset.

    Points whose elevation cannot be sampled are dropped; returns None
    when fewer than 2 points survive.
    """
    kept: List[Vertex] = []
    for p in points:
        z = sample_bilinear(grid, p)
        if z is None:
            continue
        m = to_mercator(p)
        kept.append((m.x, m.y, z + z_offset))
    if len(kept) < 2:
        return None
    return Polyline3(points=kept, kind=kind)


def _signed_area(pts: Sequence[Tuple[float, float]]) -> float:
    """Shoelace signed area; positive for counter-clockwise rings."""
    s = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s / 2.0


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper intersection test for open segments p1p2 and p3p4."""
    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1 = cross(p3, p4, p1)
    d2 = cross(p3, p4, p2)
    d3 = cross(p1, p2, p3)
    d4 = cross(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _is_simple(pts: Sequence[Tuple[float, float]]) -> bool:
    n = len(pts)
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            # skip segments sharing an endpoint
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            b1, b2 = pts[j], pts[(j + 1) % n]
            if _segments_intersect(a1, a2, b1, b2):
                return False
    return True


def _point_in_triangle(p, a, b, c, eps: float) -> bool:
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    d1 = cross(a, b, p)
    d2 = cross(b, c, p)
    d3 = cross(c, a, p)
    has_neg = (d1 < -eps) or (d2 < -eps) or (d3 < -eps)
    has_pos = (d1 > eps) or (d2 > eps) or (d3 > eps)
    return not (has_neg and has_pos)


def ear_clip(ring: Sequence[Tuple[float, float]]) -> List[Triangle]:
    """Triangulate a simple polygon by ear clipping.

    Returns N-2 index triples into the input ring (stored without a
    repeated closing point). Winding is normalized internally; output
    indices always refer to the original vertex order.
    """
    pts = list(ring)
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    if len(set(pts)) < 3:
        raise ValueError("ring needs at least 3 distinct vertices")
    if not _is_simple(pts):
        raise ValueError("ring is self-intersecting")

    n = len(pts)
    order = list(range(n))
    if _signed_area(pts) < 0:
        order.reverse()

    scale = max(max(abs(x), abs(y)) for x, y in pts)
    eps = 1e-12 * max(scale * scale, 1.0)

    def cross_at(i_prev, i, i_next):
        ax, ay = pts[order[i_prev]]
        bx, by = pts[order[i]]
        cx, cy = pts[order[i_next]]
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)

    triangles: List[Triangle] = []
    guard = 0
    while len(order) > 3:
        m = len(order)
        clipped = False
        for i in range(m):
            i_prev = (i - 1) % m
            i_next = (i + 1) % m
            if cross_at(i_prev, i, i_next) <= eps:
                continue  # reflex or collinear corner, not an ear
            a = pts[order[i_prev]]
            b = pts[order[i]]
            c = pts[order[i_next]]
            blocked = False
            for j in range(m):
                if j in (i_prev, i, i_next):
                    continue
                if _point_in_triangle(pts[order[j]], a, b, c, eps):
                    blocked = True
                    break
            if not blocked:
                triangles.append((order[i_prev], order[i], order[i_next]))
                del order[i]
                clipped = True
                break
        if not clipped:
            raise ValueError("ear clipping failed: polygon is degenerate or not simple")
        guard += 1
        if guard > 10 * n:
            raise ValueError("ear clipping did not terminate")
    triangles.append((order[0], order[1], order[2]))
    return triangles


def extrude(ring: Sequence[Tuple[float, float]], base_z: float, height: float) -> TriMesh:
    """Extrude a footprint ring into a prism between base_z and base_z+height.

    Produces 2N vertices (base then roof), 2N wall triangles (two per
    edge) and N-2 roof triangles; the base face is omitted.
    """
    if height <= 0:
        raise ValueError("height must be positive")
    roof_tris = ear_clip(ring)  # also validates simplicity
    pts = list(ring)
    if len(pts) >= 2 and pts[0] == pts[-1]:
        pts = pts[:-1]
    n = len(pts)

    vertices: List[Vertex] = [(x, y, base_z) for x, y in pts]
    vertices += [(x, y, base_z + height) for x, y in pts]

    triangles: List[Triangle] = []
    for i in range(n):
        j = (i + 1) % n
        # two wall triangles per edge: (base_i, base_j, roof_j), (base_i, roof_j, roof_i)
        triangles.append((i, j, n + j))
        triangles.append((i, n + j, n + i))
    triangles += [(a + n, b + n, c + n) for a, b, c in roof_tris]
    return TriMesh(vertices=vertices, triangles=triangles)


def merge_meshes(meshes: Sequence[TriMesh]) -> TriMesh:
    """Concatenate meshes, offsetting triangle indices as vertices accumulate."""
    out = TriMesh()
    for m in meshes:
        base = len(out.vertices)
        out.vertices.extend(m.vertices)
        out.triangles.extend((a + base, b + base, c + base) for a, b, c in m.triangles)
    return out
