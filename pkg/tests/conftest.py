"""
Pytest configuration and shared fixtures for Bell/CHSH toolkit tests
"""

import math
import os
import tempfile
import warnings

import numpy as np
import pytest

from bellsim.core import ASPECT_ANGLES, ExperimentConfig
from bellsim.classical_model import bell_measure


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical sweeps (deselect with -m 'not slow')")


@pytest.fixture
def sample_config_path():
    """Path to sample scenario file for testing."""
    return os.path.join(os.path.dirname(__file__), 'fixtures', 'sample_config.json')


@pytest.fixture
def temp_output_dir():
    """Temporary directory for test outputs."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


@pytest.fixture
def aspect_angles():
    """(a1, a2, b1, b2) = (0, pi/4, pi/8, 3pi/8)."""
    return ASPECT_ANGLES


@pytest.fixture
def aspect_measure():
    """P_Bell at the Aspect angles."""
    return bell_measure(*ASPECT_ANGLES)


@pytest.fixture
def uncorrelated_angles():
    """Every setting difference an odd multiple of pi/4: all blocks uniform."""
    return (math.pi / 2, 0.0, math.pi / 4, -math.pi / 4)


@pytest.fixture
def small_experiment():
    """Fast experiment configuration at the Aspect angles."""
    return ExperimentConfig(angles=ASPECT_ANGLES, runs=20_000, seed=12345)


@pytest.fixture
def rng():
    """Seeded generator for randomised property checks."""
    return np.random.default_rng(20251018)


@pytest.fixture
def clean_seed_env(monkeypatch):
    """Remove BELLSIM_SEED so the built-in default applies."""
    monkeypatch.delenv("BELLSIM_SEED", raising=False)


def assert_approximately_equal(actual, expected, tolerance_abs=1e-12):
    """
    Assert that two values agree within an absolute tolerance.

    Args:
        actual: Actual value
        expected: Expected value
        tolerance_abs: Absolute tolerance (default 1e-12, the toolkit's identity tolerance)
    """
    assert abs(actual - expected) <= tolerance_abs, \
        f"Values not approximately equal: {actual} vs {expected} (tolerance: {tolerance_abs})"


def quiet_measure(*angles):
    """bell_measure without the degenerate-angle warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return bell_measure(*angles)
