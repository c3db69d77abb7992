"""Shared test configuration and fixture helpers."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")




@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
