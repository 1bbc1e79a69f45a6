import json
import threading

import pytest
from fastapi.testclient import TestClient

from cenergy.pipeline import PipelineConfig
from cenergy.providers import Transport
from cenergy.service import create_app
from conftest import FIXTURE_DIR, GOLDEN_PATH


@pytest.fixture
def offline_config():
    return PipelineConfig(offline=True, fixture_dir=str(FIXTURE_DIR))


@pytest.fixture
def app(offline_config):
    return create_app(offline_config)


@pytest.fixture
def client(app):
    return TestClient(app)


def test_health_fresh(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "cache_entries": 0}
    assert r.headers["access-control-allow-origin"] == "*"


def test_get_model_golden(client):
    r = client.get("/KEY/Testville")
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("application/json")
    assert r.content == GOLDEN_PATH.read_bytes()
    assert "access-control-allow-origin" in r.headers
    assert "records of elevations" in r.headers["x-model-stats"]


def test_health_counts_cache_entries(client):
    client.get("/KEY/Testville")
    r = client.get("/health")
    assert r.json()["cache_entries"] == 1


def test_not_found_place(client):
    r = client.get("/KEY/NoSuchPlaceZZZ")
    assert r.status_code == 404
    body = r.json()
    assert body["status"] == 404
    assert body["stage"] == "geocode"
    assert body["message"]


def test_second_request_served_from_cache(offline_config):
    transport = Transport(mode="replay", fixture_dir=FIXTURE_DIR)
    app = create_app(offline_config, transport=transport)
    client = TestClient(app)
    r1 = client.get("/KEY/Testville")
    upstream_after_first = len(transport.requests_seen)
    assert upstream_after_first == 5  # geocode + dem + 3 overpass
    r2 = client.get("/KEY/Testville")
    assert len(transport.requests_seen) == upstream_after_first  # zero new calls
    assert r1.content == r2.content == GOLDEN_PATH.read_bytes()


def test_api_key_only_reaches_elevation_provider(offline_config):
    transport = Transport(mode="replay", fixture_dir=FIXTURE_DIR)
    app = create_app(offline_config, transport=transport)
    TestClient(app).get("/SECRETKEY/Testville")
    for canon in transport.requests_seen:
        assert "SECRETKEY" not in canon  # redacted before hashing/storage
        if "opentopography" not in canon:
            assert "API_Key" not in canon


def test_empty_segments_rejected(client):
    r = client.get("/KEY/%20")
    assert r.status_code == 400


def test_concurrent_distinct_requests(offline_config):
    app = create_app(offline_config)
    client = TestClient(app)
    results = {}

    def fetch(place):
        results[place] = client.get(f"/KEY/{place}")

    threads = [threading.Thread(target=fetch, args=(p,))
               for p in ("Testville", "NoSuchPlaceZZZ")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results["Testville"].status_code == 200
    assert results["NoSuchPlaceZZZ"].status_code == 404


def test_concurrent_health_probes(client):
    codes = []

    def probe():
        codes.append(client.get("/health").status_code)

    threads = [threading.Thread(target=probe) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert codes == [200] * 8


def test_bbox_cap_maps_to_422():
    cfg = PipelineConfig(offline=True, fixture_dir=str(FIXTURE_DIR),
                         max_bbox_area=0.001)
    client = TestClient(create_app(cfg))
    r = client.get("/KEY/Testville")
    assert r.status_code == 422
    assert r.json()["stage"] == "bbox"
