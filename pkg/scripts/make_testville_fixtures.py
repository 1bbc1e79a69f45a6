#!/usr/bin/env python3
"""Build the Testville offline fixture set and the golden figure JSON.

Drives the real provider request construction through a canned
transport in record mode, so fixture hashes always match what the
pipeline computes. Rerun after changing any provider URL or query
construction; commit the resulting files.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from geotiff_writer import write_geotiff  # noqa: E402

from cenergy import scene  # noqa: E402
from cenergy.pipeline import PipelineConfig, generate  # noqa: E402
from cenergy.providers import Transport  # noqa: E402

FIXTURE_DIR = REPO / "tests" / "fixtures" / "testville"
GOLDEN = REPO / "tests" / "golden" / "testville.json"

DEM_VALUES = [
    [10.0, 12.0, 11.0, 13.0],
    [14.0, 15.0, 16.0, 17.0],
    [13.0, 12.0, 11.0, 10.0],
    [9.0, 8.0, 7.0, 6.0],
]

BOUNDARY = [[10.0, 0.0], [10.04, 0.0], [10.04, 0.04], [10.0, 0.04], [10.0, 0.0]]

GEOCODE_TESTVILLE = [
    {
        "place_id": 1,
        "display_name": "Testville",
        "geojson": {"type": "Polygon", "coordinates": [BOUNDARY]},
    }
]

ROADS = {
    "elements": [
        {
            "type": "way",
            "id": 101,
            "tags": {"highway": "residential", "name": "Main Street"},
            "geometry": [
                {"lon": 10.006, "lat": 0.006},
                {"lon": 10.020, "lat": 0.020},
                {"lon": 10.034, "lat": 0.030},
            ],
        },
        {
            "type": "way",
            "id": 102,
            "tags": {"highway": "track"},
            "geometry": [
                {"lon": 10.010, "lat": 0.030},
                {"lon": 10.030, "lat": 0.010},
            ],
        },
    ]
}

POWER = {
    "elements": [
        {
            "type": "way",
            "id": 201,
            "tags": {"power": "line"},
            "geometry": [
                {"lon": 10.006, "lat": 0.034},
                {"lon": 10.034, "lat": 0.006},
            ],
        }
    ]
}


def square(cx: float, cy: float, half: float) -> list:
    return [
        {"lon": cx - half, "lat": cy - half},
        {"lon": cx + half, "lat": cy - half},
        {"lon": cx + half, "lat": cy + half},
        {"lon": cx - half, "lat": cy + half},
        {"lon": cx - half, "lat": cy - half},
    ]


BUILDINGS = {
    "elements": [
        {"type": "way", "id": 301, "tags": {"building": "yes"},
         "geometry": square(10.0105, 0.0105, 0.0001)},
        {"type": "way", "id": 302, "tags": {"building": "house"},
         "geometry": square(10.0255, 0.0255, 0.0001)},
    ]
}

HEIGHTS = [
    {"geometry": [[p["lon"], p["lat"]] for p in square(10.0105, 0.0105, 0.00012)],
     "height": 12.0},
    {"geometry": [[p["lon"], p["lat"]] for p in square(10.0255, 0.0255, 0.00012)],
     "height": 6.5},
]


class CannedTransport(Transport):
    """Record-mode transport whose live leg serves canned responses."""

    def _live(self, method, url, body, headers):
        if "nominatim" in url:
            if "NoSuchPlaceZZZ" in url:
                return json.dumps([]).encode(), 200
            return json.dumps(GEOCODE_TESTVILLE).encode(), 200
        if "opentopography" in url:
            dem = write_geotiff(DEM_VALUES, dtype="float32", compression="deflate",
                                tie_lon=10.0, tie_lat=0.04, dlon=0.01, dlat=0.01,
                                nodata=-9999.0)
            return dem, 200
        if "overpass" in url:
            if '"highway"' in body:
                return json.dumps(ROADS).encode(), 200
            if '"power"' in body:
                return json.dumps(POWER).encode(), 200
            if '"building"' in body:
                return json.dumps(BUILDINGS).encode(), 200
        raise AssertionError(f"unexpected request: {method} {url}")


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    for old in FIXTURE_DIR.glob("*"):
        old.unlink()
    GOLDEN.parent.mkdir(parents=True, exist_ok=True)

    heights_path = FIXTURE_DIR / "heights.ndjson"
    heights_path.write_text(
        "".join(json.dumps(rec) + "\n" for rec in HEIGHTS), encoding="utf-8"
    )

    transport = CannedTransport(mode="record", fixture_dir=FIXTURE_DIR)
    config = PipelineConfig(record=True, fixture_dir=str(FIXTURE_DIR))
    fig, stats = generate("Testville", "TESTKEY", config, transport=transport)
    print("stats:", stats)

    # also record the not-found geocode exchange for the service tests
    from cenergy.providers import NotFound, geocode
    try:
        geocode("NoSuchPlaceZZZ", transport)
    except NotFound:
        pass

    # golden figure must come from a replay run so it reflects exactly
    # what offline consumers will see
    replay_config = PipelineConfig(offline=True, fixture_dir=str(FIXTURE_DIR))
    fig2, stats2 = generate("Testville", "", replay_config)
    payload = scene.serialize(fig2)
    assert payload == scene.serialize(fig)
    assert (stats2.elevation_count, stats2.road_segments,
            stats2.power_lines, stats2.buildings_with_height) == (16, 2, 1, 2), stats2
    GOLDEN.write_bytes(payload)
    print(f"wrote {GOLDEN} ({len(payload)} bytes), fixtures in {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
