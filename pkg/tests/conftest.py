# tests/conftest.py

import numpy as np
import pytest

from app.dynamics.coefficients import unit_speed_model
from app.metrics.grid import BreakpointGrid


@pytest.fixture
def unit_grid() -> BreakpointGrid:
    return BreakpointGrid.from_points([0.0, 1.0, 2.0])


@pytest.fixture
def free_model(unit_grid):
    # g1 = 1, no outflow anywhere
    return unit_speed_model(unit_grid)


@pytest.fixture
def outflow_model(unit_grid):
    # g1 = 1, constant outflow c_1 = 1 from x_1
    return unit_speed_model(unit_grid, [0.0, 1.0])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    # Keep every test in-process unless it sets MTLAB_WORKERS itself
    monkeypatch.setenv("MTLAB_WORKERS", "1")
