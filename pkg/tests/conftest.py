from __future__ import annotations

import json
from pathlib import Path

import pytest

from bandwidth_engine.fixtures import (
    day_forecast_rows,
    reference_zone,
    reference_zone_dict,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def zone():
    return reference_zone()


@pytest.fixture(scope="session")
def zone_path(tmp_path_factory):
    """Bundled zone file; falls back to regenerating it in tmp."""
    p = DATA_DIR / "zone90kv.json"
    if p.exists():
        return p
    p = tmp_path_factory.mktemp("data") / "zone90kv.json"
    p.write_text(json.dumps(reference_zone_dict(), indent=2) + "\n")
    return p


@pytest.fixture(scope="session")
def summer_day(zone):
    return day_forecast_rows(zone, "summer_day")


@pytest.fixture(scope="session")
def winter_day(zone):
    return day_forecast_rows(zone, "winter_day")
