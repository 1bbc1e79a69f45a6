"""Clients for the upstream open-data sources.

Four sources: the Nominatim geocoder, the OpenTopography elevation
service, the Overpass OSM API, and a local newline-delimited JSON
building-height extract. All HTTP goes through a Transport that can run
live, record exchanges to a fixture directory, or replay them offline
with no network access at all.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import threading
import time
import urllib.parse
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import requests

from cenergy.geodesy import GeoBBox, GeoPoint, bbox_of_ring, bbox_union, to_mercator

logger = logging.getLogger(__name__)

USER_AGENT = "cenergy/0.1 (open-data 3D urban energy scenes; contact: issues tracker)"

NOMINATIM_URL = "https://nominatim.openstreetmap.org/search"
OPENTOPO_URL = "https://portal.opentopography.org/API/globaldem"
OVERPASS_URL = "https://overpass-api.de/api/interpreter"

DEFAULT_TIMEOUT = 90.0


class ProviderError(Exception):
    """Base class for upstream data-source failures."""


class NotFound(ProviderError):
    """The geocoder returned no usable polygon result."""


class Upstream(ProviderError):
    """Upstream service failed or timed out."""


class InvalidKey(ProviderError):
    """The elevation service rejected the API key."""


class BadRequest(ProviderError):
    """Upstream rejected the request as malformed."""


class ParseError(ProviderError):
    """Upstream response could not be parsed."""


class ReplayMiss(ProviderError):
    """Offline replay had no fixture for the request."""


class FeatureSelector(Enum):
    ROADS = "roads"
    POWER_LINES = "power_lines"
    BUILDINGS = "buildings"


@dataclass(frozen=True)
class PlaceResult:
    display_name: str
    boundary: Tuple[Tuple[GeoPoint, ...], ...]  # one or more rings
    bbox: GeoBBox


@dataclass(frozen=True)
class OsmWay:
    id: int
    tags: Dict[str, str]
    geometry: Tuple[GeoPoint, ...]

    @property
    def is_closed(self) -> bool:
        return len(self.geometry) >= 4 and self.geometry[0] == self.geometry[-1]


@dataclass(frozen=True)
class HeightRecord:
    footprint: Tuple[GeoPoint, ...]
    height: float


# ---------------------------------------------------------------------------
# Record/replay transport
# ---------------------------------------------------------------------------

_KEY_RE = re.compile(r"(API_Key=)[^&]*")


def _canonical_request(method: str, url: str, body: str) -> str:
    # API keys are redacted so fixtures are key-independent and never
    # store credentials.
    url = _KEY_RE.sub(r"\1REDACTED", url)
    return f"{method} {url}\n\n{body}"


class Transport:
    """HTTP transport with live / record / replay modes.

    Fixtures are stored as fixtures/<sha256-of-request>.req (the
    canonical request text) and .resp (the raw response body). Replay
    mode never opens a network connection; a missing fixture raises
    ReplayMiss.
    """

    def __init__(self, mode: str = "live", fixture_dir: Optional[Path] = None,
                 timeout: float = DEFAULT_TIMEOUT):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown transport mode {mode!r}")
        if mode in ("record", "replay") and fixture_dir is None:
            raise ValueError(f"{mode} mode requires a fixture directory")
        self.mode = mode
        self.fixture_dir = Path(fixture_dir) if fixture_dir else None
        self.timeout = timeout
        self.requests_seen: List[str] = []  # canonical request texts, for tests
        self._lock = threading.Lock()

    def request(self, method: str, url: str, body: str = "",
                headers: Optional[Dict[str, str]] = None) -> bytes:
        canon = _canonical_request(method, url, body)
        with self._lock:
            self.requests_seen.append(canon)
        if self.mode == "replay":
            return self._replay(canon)
        resp_body, status = self._live(method, url, body, headers)
        if self.mode == "record":
            if status != 200:
                raise Upstream(f"refusing to record non-200 response ({status}) for {url}")
            self._store(canon, resp_body)
        return resp_body

    def _fixture_paths(self, canon: str) -> Tuple[Path, Path]:
        digest = hashlib.sha256(canon.encode("utf-8")).hexdigest()
        assert self.fixture_dir is not None
        return self.fixture_dir / f"{digest}.req", self.fixture_dir / f"{digest}.resp"

    def _replay(self, canon: str) -> bytes:
        _, resp_path = self._fixture_paths(canon)
        if not resp_path.exists():
            raise ReplayMiss(f"no fixture for request:\n{canon.splitlines()[0]}")
        return resp_path.read_bytes()

    def _store(self, canon: str, body: bytes) -> None:
        req_path, resp_path = self._fixture_paths(canon)
        req_path.parent.mkdir(parents=True, exist_ok=True)
        req_path.write_text(canon, encoding="utf-8")
        resp_path.write_bytes(body)

    def _live(self, method, url, body, headers) -> Tuple[bytes, int]:
        hdrs = {"User-Agent": USER_AGENT}
        if headers:
            hdrs.update(headers)
        try:
            if method == "GET":
                r = requests.get(url, headers=hdrs, timeout=self.timeout)
            elif method == "POST":
                r = requests.post(url, data=body.encode("utf-8"), headers=hdrs,
                                  timeout=self.timeout)
            else:
                raise ValueError(f"unsupported method {method}")
        except requests.Timeout as e:
            raise Upstream(f"timeout talking to {url}: {e}") from e
        except requests.RequestException as e:
            raise Upstream(f"request to {url} failed: {e}") from e
        if r.status_code == 401:
            raise InvalidKey(f"upstream rejected the API key ({url})")
        if 400 <= r.status_code < 500:
            raise BadRequest(f"upstream returned {r.status_code} for {url}")
        if r.status_code >= 500:
            raise Upstream(f"upstream returned {r.status_code} for {url}")
        return r.content, r.status_code


# ---------------------------------------------------------------------------
# Geocoding
# ---------------------------------------------------------------------------

def normalize_place(place: str) -> str:
    """URL-friendly hyphen form to a comma query; comma strings untouched."""
    if "," in place:
        return place
    return place.replace("-", ", ")


def _rings_from_geojson(geom: dict) -> List[Tuple[GeoPoint, ...]]:
    gtype = geom.get("type")
    rings: List[Tuple[GeoPoint, ...]] = []
    if gtype == "Polygon":
        polys = [geom.get("coordinates", [])]
    elif gtype == "MultiPolygon":
        polys = geom.get("coordinates", [])
    else:
        return rings
    for poly in polys:
        if not poly:
            continue
        outer = poly[0]  # outer ring only; holes ignored
        pts = tuple(GeoPoint(float(lon), float(lat)) for lon, lat in outer)
        if len(pts) >= 3:
            rings.append(pts)
    return rings


def geocode(place: str, transport: Transport) -> PlaceResult:
    """Resolve a place name to a polygon boundary and its bbox."""
    if not place or not place.strip():
        raise ValueError("place name is empty")
    query = normalize_place(place)
    url = (
        f"{NOMINATIM_URL}?q={urllib.parse.quote(query)}"
        "&format=jsonv2&polygon_geojson=1&limit=5"
    )
    body = transport.request("GET", url)
    try:
        results = json.loads(body)
    except json.JSONDecodeError as e:
        raise ParseError(f"geocoder returned invalid JSON: {e}") from e
    if not isinstance(results, list):
        raise ParseError("geocoder response is not a result list")
    for result in results:
        geom = result.get("geojson") or {}
        rings = _rings_from_geojson(geom)
        if not rings:
            continue
        bbox = bbox_union(bbox_of_ring(r) for r in rings)
        return PlaceResult(
            display_name=str(result.get("display_name", query)),
            boundary=tuple(rings),
            bbox=bbox,
        )
    raise NotFound(f"no polygon result for {query!r}")


# ---------------------------------------------------------------------------
# Elevation (OpenTopography COP30)
# ---------------------------------------------------------------------------

def fetch_dem(bbox: GeoBBox, api_key: str, transport: Transport,
              max_area: float = 0.05) -> bytes:
    """Raw GeoTIFF bytes for the COP30 DEM over bbox."""
    if bbox.area > max_area:
        raise ValueError(
            f"bbox too large: {bbox.area:.4f} deg^2 exceeds the {max_area} deg^2 cap"
        )
    if not api_key and transport.mode != "replay":
        raise ValueError("empty API key")
    url = (
        f"{OPENTOPO_URL}?demtype=COP30"
        f"&south={bbox.south!r}&north={bbox.north!r}"
        f"&west={bbox.west!r}&east={bbox.east!r}"
        f"&outputFormat=GTiff&API_Key={api_key}"
    )
    return transport.request("GET", url)


# ---------------------------------------------------------------------------
# Overpass (roads, power lines, buildings)
# ---------------------------------------------------------------------------

_SELECTOR_FILTERS = {
    FeatureSelector.ROADS: 'way["highway"]',
    FeatureSelector.POWER_LINES: 'way["power"~"^(line|minor_line|cable)$"]',
    FeatureSelector.BUILDINGS: 'way["building"]',
}

_overpass_lock = threading.Lock()  # one in-flight Overpass request at a time


def overpass_query(bbox: GeoBBox, selector: FeatureSelector) -> str:
    s, w, n, e = bbox.south, bbox.west, bbox.north, bbox.east
    return f"[out:json][timeout:90];{_SELECTOR_FILTERS[selector]}({s!r},{w!r},{n!r},{e!r});out geom;"


def fetch_osm(bbox: GeoBBox, selector: FeatureSelector,
              transport: Transport, retries: int = 3) -> List[OsmWay]:
    """Ways matching the selector, geometry resolved; buildings closed-only."""
    body = overpass_query(bbox, selector)
    with _overpass_lock:
        delay = 2.0
        for attempt in range(retries):
            try:
                raw = transport.request("POST", OVERPASS_URL, body=body)
                break
            except (BadRequest, Upstream) as e:
                # public endpoint throttling: back off and retry
                if attempt == retries - 1 or transport.mode == "replay":
                    raise
                logger.warning("overpass retry %d after: %s", attempt + 1, e)
                time.sleep(delay)
                delay *= 2
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ParseError(f"overpass returned invalid JSON: {e}") from e
    ways: List[OsmWay] = []
    for el in doc.get("elements", []):
        if el.get("type") != "way" or "geometry" not in el:
            continue
        pts = tuple(
            GeoPoint(float(g["lon"]), float(g["lat"])) for g in el["geometry"]
        )
        if len(pts) < 2:
            continue
        way = OsmWay(id=int(el["id"]), tags=dict(el.get("tags", {})), geometry=pts)
        if selector is FeatureSelector.BUILDINGS and not way.is_closed:
            continue
        ways.append(way)
    return ways


# ---------------------------------------------------------------------------
# Building heights (local extract)
# ---------------------------------------------------------------------------

def _ring_centroid(ring: Sequence[GeoPoint]) -> GeoPoint:
    """Area centroid of a polygon ring (shoelace form)."""
    pts = list(ring)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    a = 0.0
    cx = 0.0
    cy = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i].lon, pts[i].lat
        x1, y1 = pts[(i + 1) % n].lon, pts[(i + 1) % n].lat
        w = x0 * y1 - x1 * y0
        a += w
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    if abs(a) < 1e-18:  # degenerate: fall back to vertex mean
        return GeoPoint(sum(p.lon for p in pts) / n, sum(p.lat for p in pts) / n)
    a *= 0.5
    return GeoPoint(cx / (6 * a), cy / (6 * a))


def _point_in_ring(p: GeoPoint, ring: Sequence[GeoPoint]) -> bool:
    """Ray-casting point-in-polygon in geographic coordinates."""
    pts = list(ring)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    inside = False
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i].lon, pts[i].lat
        x1, y1 = pts[(i + 1) % n].lon, pts[(i + 1) % n].lat
        if (y0 > p.lat) != (y1 > p.lat):
            x_cross = x0 + (p.lat - y0) / (y1 - y0) * (x1 - x0)
            if p.lon < x_cross:
                inside = not inside
    return inside


def _mercator_distance(a: GeoPoint, b: GeoPoint) -> float:
    ma, mb = to_mercator(a), to_mercator(b)
    return math.hypot(mb.x - ma.x, mb.y - ma.y)


@dataclass
class HeightIndex:
    """Immutable height lookup over an extract's footprints."""

    records: List[HeightRecord] = field(default_factory=list)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def centroids(self) -> List[GeoPoint]:
        return [_ring_centroid(r.footprint) for r in self.records]


def load_heights(path: Path) -> HeightIndex:
    """Load a newline-delimited JSON height extract.

    Each line is {"geometry": [[lon, lat], ...], "height": meters}.
    Malformed lines and records without a finite positive height are
    skipped with a counted warning.
    """
    path = Path(path)
    records: List[HeightRecord] = []
    skipped = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                height = obj.get("height")
                ring = tuple(GeoPoint(float(lon), float(lat)) for lon, lat in obj["geometry"])
                if len(ring) < 3:
                    raise ValueError("ring too short")
            except (ValueError, KeyError, TypeError) as e:
                skipped += 1
                logger.warning("skipping height record at line %d: %s", lineno, e)
                continue
            if not isinstance(height, (int, float)) or not math.isfinite(height) or height <= 0:
                skipped += 1
                continue
            records.append(HeightRecord(footprint=ring, height=float(height)))
    return HeightIndex(records=records, skipped=skipped)


def match_height(footprint: OsmWay, index: HeightIndex,
                 max_snap_meters: float = 10.0) -> Optional[float]:
    """Height for an OSM footprint from the extract, or None.

    Containment of the footprint centroid wins; ties go to the record
    with the nearest centroid; otherwise the nearest record centroid
    within max_snap_meters.
    """
    if not index.records:
        return None
    centroid = _ring_centroid(footprint.geometry)
    containing = [
        rec for rec in index.records if _point_in_ring(centroid, rec.footprint)
    ]
    if len(containing) == 1:
        return containing[0].height
    if len(containing) > 1:
        return min(
            containing,
            key=lambda rec: _mercator_distance(centroid, _ring_centroid(rec.footprint)),
        ).height
    nearest = min(
        index.records,
        key=lambda rec: _mercator_distance(centroid, _ring_centroid(rec.footprint)),
    )
    if _mercator_distance(centroid, _ring_centroid(nearest.footprint)) <= max_snap_meters:
        return nearest.height
    return None
