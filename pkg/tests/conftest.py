"""Shared fixtures: shipped configs, small grids, and cached solves."""

from pathlib import Path

import pytest

from seglimit import DomainSpec, build_grid
from seglimit.cli import parse_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

CONFIG_NAMES = ["line_m2", "line_m3", "disk_m3", "square_m4", "square_m4_overlap"]


def config_path(name: str) -> Path:
    return CONFIG_DIR / f"{name}.cfg"


@pytest.fixture(scope="session")
def configs():
    return {name: parse_config(config_path(name)) for name in CONFIG_NAMES}


@pytest.fixture(scope="session")
def unit_interval_401():
    return build_grid(DomainSpec.interval(0.0, 1.0), 401)


@pytest.fixture(scope="session")
def unit_square_21():
    return build_grid(DomainSpec.rectangle(-1.0, 1.0, -1.0, 1.0), 21)


@pytest.fixture(scope="session")
def unit_disk_101():
    return build_grid(DomainSpec.disk(0.0, 0.0, 1.0), 101)
