from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iomc.iomodel import IOIndex, IOTable

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def toy_table(year: int = 2010, seed: int | None = None) -> IOTable:
    """2 countries, 2 sectors, 1 final item; values 1..24 unless seeded."""
    index = IOIndex(("AAA", "BBB"), ("s1", "s2"), ("fd",))
    if seed is None:
        t = np.arange(1.0, 25.0).reshape(4, 6)
    else:
        t = np.random.default_rng(seed).lognormal(2.0, 1.0, size=(4, 6))
    return IOTable(year, index, t)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
