"""Shared fixtures for the angleset test suite."""

import os

import pytest

from models.schemas import LatticePointSet

SETTINGS = (
    "ANGLESET_PRECISION_BITS",
    "ANGLESET_THREADS",
    "ANGLESET_ENUMERATION_BUDGET",
    "ANGLESET_DATABASE_URL",
)


@pytest.fixture(autouse=True)
def clean_settings():
    """Start every test from the defaults and undo anything main() exported."""
    saved = {name: os.environ.pop(name, None) for name in SETTINGS}
    yield
    for name, value in saved.items():
        if value is None:
            os.environ.pop(name, None)
        else:
            os.environ[name] = value


@pytest.fixture
def tetrahedron():
    return LatticePointSet(d=3, points=[(0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1)])


@pytest.fixture
def unit_square():
    return LatticePointSet(d=2, points=[(0, 0), (1, 0), (1, 1), (0, 1)])


@pytest.fixture
def collinear():
    return LatticePointSet(d=1, points=[(0,), (1,), (2,)])


@pytest.fixture
def database_url(tmp_path):
    return f"sqlite:///{tmp_path / 'runs.db'}"
