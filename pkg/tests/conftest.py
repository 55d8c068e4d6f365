import numpy as np
import pytest

from qstop import SliceConfig


@pytest.fixture
def cfg():
    """Default working grid: 5 slots, one channel, cap 1, qubit initial space."""
    return SliceConfig(n_slots=5, dt=0.2, d=1, cap=1, k_ini=2)


@pytest.fixture
def cfg_tiny():
    """Two slots, one channel: 4-dimensional Fock space, everything by hand."""
    return SliceConfig(n_slots=2, dt=0.5, d=1, cap=1, k_ini=2)


@pytest.fixture
def cfg_multi():
    """Two channels, so tail projections and slot operators are non-scalar."""
    return SliceConfig(n_slots=3, dt=0.25, d=2, cap=1, k_ini=2)


@pytest.fixture
def rng():
    return np.random.default_rng(20160620)
