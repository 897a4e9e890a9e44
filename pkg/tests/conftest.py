import os
from collections.abc import Generator
from unittest.mock import patch

import numpy as np
import pytest

from src.core.config import get_settings
from src.core.mrng.builder import build_mrng
from src.core.mrng.geometry import generate_uniform_dataset
from src.domain_models.dataset import Dataset
from src.domain_models.graph import ProximityGraph

# Centralized settings for the test process
# Usage: @patch.dict(os.environ, DUMMY_ENV_VARS)
DUMMY_ENV_VARS = {
    "LOG_LEVEL": "INFO",
    "ANGLE_TOLERANCE": "1e-9",
    "LEMMA4_BAND": "1e-2",
    "LEMMA4_BOUNDARY_SAMPLES": "256",
    "LEMMA4_INTERIOR_SAMPLES": "256",
    "SUPREMUM_STEP": "1e-4",
    "BUILD_THREADS": "1",
    "EXACT_BUILD_CAP": "6000",
    "CONFLICT_CAP": "3000",
    "SEARCH_BUDGET": "500",
    "SEARCH_K": "1",
    "EXPERIMENT_QUERIES": "200",
    "EXPERIMENT_OUTPUT_DIR": "results",
    "PREFIX_CHECK_NODES": "64",
    "CSV_SCHEMA_VERSION": "1",
    "FILE_RETRY_MAX": "3",
    "FILE_RETRY_BACKOFF": "0.0",
}


@pytest.fixture(autouse=True)
def _patch_env() -> Generator[None, None, None]:
    """Automatically patch environment variables for all tests using DUMMY_ENV_VARS."""
    with patch.dict(os.environ, DUMMY_ENV_VARS):
        get_settings.cache_clear()
        yield
    get_settings.cache_clear()


@pytest.fixture
def dummy_env() -> dict[str, str]:
    return DUMMY_ENV_VARS


@pytest.fixture
def collinear() -> Dataset:
    """a=(0,0), b=(1,0), c=(2,0): MRNG edges a->b, b->a, b->c, c->b."""
    return Dataset(points=np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))


@pytest.fixture
def two_points() -> Dataset:
    return Dataset(points=np.array([[0.0, 0.0], [1.0, 0.0]]))


@pytest.fixture
def conflict_triple() -> Dataset:
    """v=(0,0), u=(2.2,0), w=(2,2): w is conflicting to the single out-edge v->u."""
    return Dataset(points=np.array([[0.0, 0.0], [2.2, 0.0], [2.0, 2.0]]))


@pytest.fixture
def small_dataset() -> Dataset:
    return generate_uniform_dataset(120, 3, seed=11)


@pytest.fixture
def small_graph(small_dataset: Dataset) -> ProximityGraph:
    return build_mrng(small_dataset, seed=11)
