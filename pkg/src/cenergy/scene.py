"""Figure assembly and canonical JSON serialization.

The output document follows the plotly figure schema ({"data": [...],
"layout": {...}} with mesh3d and scatter3d traces) so it renders
directly in plotly.js / plotly.py, without depending on either for
generation. Serialization is canonical: sorted keys, no insignificant
whitespace, shortest round-tripping float strings — byte-stable for
golden tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

from cenergy.geometry import Polyline3, TriMesh

# Fixed layer colors: blue roads, red power lines, grey buildings.
ROAD_COLOR = "#1f77b4"
POWER_COLOR = "#d62728"
BUILDING_COLOR = "#c8c8c8"
TERRAIN_COLORSCALE = "Viridis"

# Sentinel separating polylines inside one scatter3d trace;
# serialized as JSON null.
BREAK = None


class SchemaError(ValueError):
    """Figure document does not match the expected shape."""


@dataclass
class Mesh3dTrace:
    name: str
    x: List[float]
    y: List[float]
    z: List[float]
    i: List[int]
    j: List[int]
    k: List[int]
    color: Optional[str] = None
    intensity: Optional[List[float]] = None
    colorscale: Optional[str] = None
    extras: Dict = field(default_factory=dict)

    def validate(self) -> None:
        if not (len(self.x) == len(self.y) == len(self.z)):
            raise SchemaError("mesh3d coordinate arrays must have equal length")
        if not (len(self.i) == len(self.j) == len(self.k)):
            raise SchemaError("mesh3d index arrays must have equal length")
        all_idx = list(self.i) + list(self.j) + list(self.k)
        if all_idx and max(all_idx) >= len(self.x):
            raise SchemaError("mesh3d index out of range")

    def to_dict(self) -> Dict:
        d = dict(self.extras)
        d.update({
            "type": "mesh3d",
            "name": self.name,
            "x": self.x, "y": self.y, "z": self.z,
            "i": self.i, "j": self.j, "k": self.k,
        })
        if self.color is not None:
            d["color"] = self.color
        if self.intensity is not None:
            d["intensity"] = self.intensity
        if self.colorscale is not None:
            d["colorscale"] = self.colorscale
        return d


@dataclass
class Lines3dTrace:
    name: str
    x: List[Optional[float]]
    y: List[Optional[float]]
    z: List[Optional[float]]
    line_color: str = ROAD_COLOR
    line_width: float = 2
    extras: Dict = field(default_factory=dict)

    def validate(self) -> None:
        if not (len(self.x) == len(self.y) == len(self.z)):
            raise SchemaError("scatter3d coordinate arrays must have equal length")
        breaks = [idx for idx, v in enumerate(self.x) if v is None]
        if breaks != [idx for idx, v in enumerate(self.y) if v is None] or \
           breaks != [idx for idx, v in enumerate(self.z) if v is None]:
            raise SchemaError("break markers misaligned across x/y/z")

    def to_dict(self) -> Dict:
        d = dict(self.extras)
        d.update({
            "type": "scatter3d",
            "mode": "lines",
            "name": self.name,
            "x": self.x, "y": self.y, "z": self.z,
            "line": {"color": self.line_color, "width": self.line_width},
        })
        return d


@dataclass
class RawTrace:
    """Opaque passthrough for trace types this package does not build."""

    extras: Dict = field(default_factory=dict)

    def validate(self) -> None:
        pass

    def to_dict(self) -> Dict:
        return dict(self.extras)


Trace = Union[Mesh3dTrace, Lines3dTrace, RawTrace]


@dataclass
class Figure:
    """Ordered trace list plus layout; the artifact's interchange value."""

    data: List[Trace] = field(default_factory=list)
    layout: Dict = field(default_factory=lambda: {"scene": {"aspectmode": "data"}})


def terrain_trace(mesh: TriMesh, colorscale: str = TERRAIN_COLORSCALE) -> Mesh3dTrace:
    """Terrain mesh trace colored by elevation."""
    if not mesh.vertices or not mesh.triangles:
        raise ValueError("terrain mesh is empty")
    mesh.validate()
    xs = [v[0] for v in mesh.vertices]
    ys = [v[1] for v in mesh.vertices]
    zs = [v[2] for v in mesh.vertices]
    t = Mesh3dTrace(
        name="Terrain",
        x=xs, y=ys, z=zs,
        i=[t[0] for t in mesh.triangles],
        j=[t[1] for t in mesh.triangles],
        k=[t[2] for t in mesh.triangles],
        intensity=list(zs),
        colorscale=colorscale,
    )
    t.validate()
    return t


def buildings_trace(mesh: TriMesh, color: str = BUILDING_COLOR) -> Mesh3dTrace:
    """Merged buildings mesh as a single flat-colored trace."""
    mesh.validate()
    t = Mesh3dTrace(
        name="Buildings",
        x=[v[0] for v in mesh.vertices],
        y=[v[1] for v in mesh.vertices],
        z=[v[2] for v in mesh.vertices],
        i=[t[0] for t in mesh.triangles],
        j=[t[1] for t in mesh.triangles],
        k=[t[2] for t in mesh.triangles],
        color=color,
    )
    t.validate()
    return t


def lines_trace(lines: Sequence[Polyline3], kind: str) -> Lines3dTrace:
    """Concatenate polylines into one scatter3d trace with null breaks."""
    if kind == "road":
        name, color = "Roads", ROAD_COLOR
    elif kind == "power":
        name, color = "Power lines", POWER_COLOR
    else:
        raise ValueError(f"unknown line kind {kind!r}")
    xs: List[Optional[float]] = []
    ys: List[Optional[float]] = []
    zs: List[Optional[float]] = []
    for idx, pl in enumerate(lines):
        if len(pl.points) < 2:
            raise ValueError("polyline needs at least 2 points")
        if idx > 0:
            xs.append(BREAK)
            ys.append(BREAK)
            zs.append(BREAK)
        for x, y, z in pl.points:
            xs.append(x)
            ys.append(y)
            zs.append(z)
    t = Lines3dTrace(name=name, x=xs, y=ys, z=zs, line_color=color)
    t.validate()
    return t


def _check_finite(obj) -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite number in figure: {obj}")
    elif isinstance(obj, dict):
        for v in obj.values():
            _check_finite(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _check_finite(v)


def serialize(fig: Figure) -> bytes:
    """Canonical UTF-8 JSON bytes for a Figure."""
    for trace in fig.data:
        trace.validate()
    doc = {"data": [t.to_dict() for t in fig.data], "layout": fig.layout}
    _check_finite(doc)
    return json.dumps(
        doc, sort_keys=True, separators=(",", ":"), allow_nan=False, ensure_ascii=False
    ).encode("utf-8")


def _trace_from_dict(d: Dict) -> Trace:
    kind = d.get("type")
    required = {"name", "x", "y", "z"}
    if kind == "mesh3d" and required | {"i", "j", "k"} <= d.keys():
        known = {"type", "name", "x", "y", "z", "i", "j", "k", "color", "intensity", "colorscale"}
        t = Mesh3dTrace(
            name=d.get("name", ""),
            x=d.get("x", []), y=d.get("y", []), z=d.get("z", []),
            i=d.get("i", []), j=d.get("j", []), k=d.get("k", []),
            color=d.get("color"),
            intensity=d.get("intensity"),
            colorscale=d.get("colorscale"),
            extras={k: v for k, v in d.items() if k not in known},
        )
        return t
    if kind == "scatter3d" and d.get("mode") == "lines" and required <= d.keys() \
            and isinstance(d.get("line"), dict):
        known = {"type", "mode", "name", "x", "y", "z", "line"}
        line = d["line"]
        if set(line) != {"color", "width"}:
            # line shapes we would not re-emit byte-identically: pass through
            return RawTrace(extras=dict(d))
        extras = {k: v for k, v in d.items() if k not in known}
        return Lines3dTrace(
            name=d.get("name", ""),
            x=d.get("x", []), y=d.get("y", []), z=d.get("z", []),
            line_color=line.get("color", ROAD_COLOR),
            line_width=line.get("width", 2),
            extras=extras,
        )
    return RawTrace(extras=dict(d))


def deserialize(data: bytes) -> Figure:
    """Parse figure JSON bytes back into a Figure.

    Unknown keys ride along in per-trace extras, so serialize(deserialize(b))
    is lossless on foreign figures.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"malformed figure JSON: {e}") from e
    if not isinstance(doc, dict) or "data" not in doc:
        raise SchemaError('figure JSON must be an object with a "data" array')
    if not isinstance(doc["data"], list):
        raise SchemaError('"data" must be an array of traces')
    traces = [_trace_from_dict(t) if isinstance(t, dict) else RawTrace(extras={"value": t})
              for t in doc["data"]]
    return Figure(data=traces, layout=doc.get("layout", {}))
