"""Shared test fixtures for qalretrieve tests."""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from src.core.lattice import generate_lattice
from src.core.logger import reset_logger


@pytest.fixture(autouse=True)
def reset_logging():
    """Detach handlers a test may have installed on the app logger."""
    yield
    reset_logger()


@pytest.fixture
def tmp_dir():
    """Provide a temporary directory that is cleaned up after test."""
    d = tempfile.mkdtemp()
    yield Path(d)
    shutil.rmtree(d, ignore_errors=True)


@pytest.fixture(scope="session")
def lattice():
    """Seed-42 lattice with the default ramp width and epsilon."""
    return generate_lattice(42)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
