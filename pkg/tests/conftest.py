"""Shared fixtures for the polyheat test suite."""

import numpy as np
import pytest

from polyheat.core.grid import GridSpec, gaussian_bump


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def line_grid():
    """N = 1, 4096 points on a box of side 256."""
    return GridSpec(1, 4096, 256.0)


@pytest.fixture
def small_line_grid():
    return GridSpec(1, 256, 32.0)


@pytest.fixture
def plane_grid():
    return GridSpec(2, 128, 32.0)


@pytest.fixture
def bump(line_grid):
    return gaussian_bump(line_grid, width=1.0)


@pytest.fixture
def run_dir(tmp_path, monkeypatch):
    """Output directory for CLI runs, with POLYHEAT_OUT cleared."""
    monkeypatch.delenv("POLYHEAT_OUT", raising=False)
    monkeypatch.chdir(tmp_path)
    return tmp_path / "runs"
