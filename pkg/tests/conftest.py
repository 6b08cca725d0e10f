from __future__ import annotations

import numpy as np
import pytest

from ibmpower.gaussian_paths import Streams


@pytest.fixture
def streams():
    return Streams.for_replicate(12345, 0)


def within_se(estimate, target, se, k=3.0):
    return abs(estimate - target) <= k * se


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def coupled_ensemble():
    """Coupled-mode replicates shared by the skeleton, local-time and acceptance tests."""
    from ibmpower.localtime import coupled_diagnostics
    return coupled_diagnostics(2024, levels=(8, 12, 16), replicates=500)
