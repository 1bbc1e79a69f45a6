import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for geotiff_writer

from cenergy.raster import DemGrid

TESTS_DIR = Path(__file__).parent
FIXTURE_DIR = TESTS_DIR / "fixtures" / "testville"
GOLDEN_PATH = TESTS_DIR / "golden" / "testville.json"


@pytest.fixture
def testville_fixtures() -> Path:
    return FIXTURE_DIR


@pytest.fixture
def golden_bytes() -> bytes:
    return GOLDEN_PATH.read_bytes()


def make_grid(values, lon0=10.005, lat0=0.035, dlon=0.01, dlat=0.01, nodata=None) -> DemGrid:
    """DemGrid from a nested list; lon0/lat0 are the first pixel center."""
    arr = np.asarray(values, dtype=np.float32)
    return DemGrid(
        lon0=lon0, lat0=lat0, dlon=dlon, dlat=dlat,
        rows=arr.shape[0], cols=arr.shape[1], values=arr, nodata=nodata,
    )
