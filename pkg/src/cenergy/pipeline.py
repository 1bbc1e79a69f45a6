"""Pipeline orchestration: place name in, figure + stats out.

Runs geocode -> DEM -> OSM -> heights -> meshes -> figure with stage
error tagging, an in-memory TTL cache, and one structured log line per
run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from cenergy import geometry, providers, scene
from cenergy.geodesy import GeoPoint
from cenergy.providers import FeatureSelector, HeightIndex, Transport
from cenergy.raster import DemGrid, decode_geotiff, sample_bilinear
from cenergy.scene import Figure

logger = logging.getLogger(__name__)

# Fixture-dir height extract picked up automatically in offline mode
# when no explicit extract is configured.
FIXTURE_HEIGHTS_NAME = "heights.ndjson"


class PipelineError(Exception):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, message: str, cause: Optional[Exception] = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    max_bbox_area: float = 0.05       # square degrees
    densify_step: float = 30.0        # meters, one COP30 pixel
    road_offset: float = 0.5          # meters above terrain
    power_offset: float = 10.0        # meters above terrain
    default_height: float = 8.0       # meters, ~2-3 stories
    height_extract: Optional[str] = None
    cache_ttl: float = 86400.0        # seconds
    offline: bool = False
    fixture_dir: Optional[str] = None
    record: bool = False

    def __post_init__(self):
        for name in ("max_bbox_area", "densify_step", "road_offset",
                     "power_offset", "default_height", "cache_ttl"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.offline and not self.fixture_dir:
            raise ValueError("offline mode requires a fixture directory")
        if self.offline and self.record:
            raise ValueError("offline and record modes are mutually exclusive")

    def digest(self) -> str:
        """Digest of every field that affects generated output."""
        payload = {
            k: v for k, v in asdict(self).items() if k != "cache_ttl"
        }
        blob = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def transport_mode(self) -> str:
        if self.offline:
            return "replay"
        if self.record:
            return "record"
        return "live"


@dataclass
class ModelStats:
    elevation_count: int = 0
    road_segments: int = 0
    power_lines: int = 0
    buildings_with_height: int = 0
    skipped_footprints: int = 0

    def log_line(self) -> str:
        return (
            f"we collect {self.elevation_count:,} records of elevations, "
            f"{self.road_segments} road segments, {self.power_lines} power lines, "
            f"and {self.buildings_with_height} buildings with height"
        )


class FigureCache:
    """In-memory TTL cache of serialized figures, keyed by place + config.

    The clock is injectable so TTL expiry is testable without sleeping.
    """

    def __init__(self, ttl: float = 86400.0, clock: Callable[[], float] = time.monotonic):
        self.ttl = ttl
        self._clock = clock
        self._entries: Dict[str, Tuple[float, bytes, ModelStats]] = {}
        self._lock = threading.Lock()

    @staticmethod
    def key(place: str, config: PipelineConfig) -> str:
        normalized = providers.normalize_place(place)
        return hashlib.sha256(f"{normalized}|{config.digest()}".encode()).hexdigest()

    def lookup(self, key: str) -> Optional[Tuple[bytes, ModelStats]]:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                return None
            stamp, payload, stats = entry
            if self._clock() - stamp > self.ttl:
                del self._entries[key]
                return None
            return payload, stats

    def store(self, key: str, payload: bytes, stats: ModelStats) -> None:
        with self._lock:
            self._entries[key] = (self._clock(), payload, stats)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _stage(name: str):
    """Decorator-free stage wrapper: re-raise with the stage name attached."""
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, str(exc), cause=exc) from exc
            return False

    return _Ctx()


def _ring_to_mercator(ring: Tuple[GeoPoint, ...]) -> List[Tuple[float, float]]:
    pts = list(ring)
    if pts[0] == pts[-1]:
        pts = pts[:-1]
    merc = []
    for p in pts:
        m = geometry.to_mercator(p)
        merc.append((m.x, m.y))
    return merc


def _build_buildings(ways, grid: DemGrid, heights: Optional[HeightIndex],
                     config: PipelineConfig, stats: ModelStats) -> geometry.TriMesh:
    meshes: List[geometry.TriMesh] = []
    for way in ways:
        if not way.is_closed:
            stats.skipped_footprints += 1
            continue
        samples = [sample_bilinear(grid, p) for p in way.geometry[:-1]]
        present = [s for s in samples if s is not None]
        if not present:
            stats.skipped_footprints += 1
            continue
        base_z = min(present)
        height = None
        if heights is not None:
            height = providers.match_height(way, heights)
        if height is None:
            height = config.default_height
        try:
            ring = _ring_to_mercator(way.geometry)
            mesh = geometry.extrude(ring, base_z=base_z, height=height)
        except ValueError as e:
            stats.skipped_footprints += 1
            logger.warning("skipping footprint way %d: %s", way.id, e)
            continue
        meshes.append(mesh)
    stats.buildings_with_height = len(meshes)
    return geometry.merge_meshes(meshes)


def _drape_ways(ways, grid: DemGrid, step: float, z_offset: float,
                kind: str) -> List[geometry.Polyline3]:
    lines = []
    for way in ways:
        dense = geometry.densify(way.geometry, step)
        line = geometry.drape(dense, grid, z_offset=z_offset, kind=kind)
        if line is not None:
            lines.append(line)
    return lines


def generate(place: str, api_key: str, config: Optional[PipelineConfig] = None,
             transport: Optional[Transport] = None) -> Tuple[Figure, ModelStats]:
    """Generate a 3D scene figure and its stats for a named place."""
    config = config or PipelineConfig()
    if transport is None:
        transport = Transport(
            mode=config.transport_mode(),
            fixture_dir=Path(config.fixture_dir) if config.fixture_dir else None,
        )
    if not place or not place.strip():
        raise PipelineError("geocode", "place name is empty")
    if not api_key and transport.mode != "replay":
        raise PipelineError("dem", "empty API key (set CENERGY_OPENTOPO_KEY or --api-key)")

    timings: Dict[str, float] = {}
    t_start = time.perf_counter()

    def mark(stage: str, t0: float) -> None:
        timings[stage] = round(time.perf_counter() - t0, 4)

    t0 = time.perf_counter()
    with _stage("geocode"):
        result = providers.geocode(place, transport)
    mark("geocode", t0)
    bbox = result.bbox
    if bbox.area > config.max_bbox_area:
        raise PipelineError(
            "bbox",
            f"bbox of {place!r} covers {bbox.area:.4f} deg^2, over the "
            f"{config.max_bbox_area} deg^2 cap",
        )

    t0 = time.perf_counter()
    with _stage("dem"):
        dem_bytes = providers.fetch_dem(bbox, api_key, transport,
                                        max_area=config.max_bbox_area)
        grid = decode_geotiff(dem_bytes)
    mark("dem", t0)

    t0 = time.perf_counter()
    with _stage("terrain"):
        terrain = geometry.grid_mesh(grid)
    mark("terrain", t0)

    t0 = time.perf_counter()
    with _stage("osm"):
        roads = providers.fetch_osm(bbox, FeatureSelector.ROADS, transport)
        power = providers.fetch_osm(bbox, FeatureSelector.POWER_LINES, transport)
        buildings = providers.fetch_osm(bbox, FeatureSelector.BUILDINGS, transport)
    mark("osm", t0)

    t0 = time.perf_counter()
    with _stage("heights"):
        heights: Optional[HeightIndex] = None
        extract = config.height_extract
        if extract is None and config.fixture_dir:
            candidate = Path(config.fixture_dir) / FIXTURE_HEIGHTS_NAME
            if candidate.exists():
                extract = str(candidate)
        if extract:
            heights = providers.load_heights(Path(extract))
    mark("heights", t0)

    stats = ModelStats()
    t0 = time.perf_counter()
    with _stage("drape"):
        road_lines = _drape_ways(roads, grid, config.densify_step,
                                 config.road_offset, "road")
        power_lines = _drape_ways(power, grid, config.densify_step,
                                  config.power_offset, "power")
    mark("drape", t0)

    t0 = time.perf_counter()
    with _stage("buildings"):
        buildings_mesh = _build_buildings(buildings, grid, heights, config, stats)
    mark("buildings", t0)

    stats.elevation_count = int(grid.valid_mask().sum())
    stats.road_segments = len(roads)
    stats.power_lines = len(power)

    with _stage("figure"):
        traces: List[scene.Trace] = [
            scene.terrain_trace(terrain),
            scene.buildings_trace(buildings_mesh),
            scene.lines_trace(road_lines, "road"),
            scene.lines_trace(power_lines, "power"),
        ]
        fig = Figure(
            data=traces,
            layout={
                "scene": {"aspectmode": "data"},
                "title": result.display_name,
            },
        )

    # sanity: stats vs traces
    assert stats.elevation_count == len(terrain.vertices)

    timings["total"] = round(time.perf_counter() - t_start, 4)
    logger.info("%s", json.dumps({
        "place": providers.normalize_place(place),
        "stats": {
            "elevation_count": stats.elevation_count,
            "road_segments": stats.road_segments,
            "power_lines": stats.power_lines,
            "buildings_with_height": stats.buildings_with_height,
        },
        "timings": timings,
    }, sort_keys=True))
    logger.info("%s", stats.log_line())
    return fig, stats
