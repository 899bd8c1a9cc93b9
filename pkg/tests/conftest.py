"""Shared fixtures: canonical problem instances and a seeded RNG."""

import numpy as np
import pytest

from vortexnav import VortexProblem


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260819)


@pytest.fixture
def prob_strong() -> VortexProblem:
    """Strong drift at the start point: |mu| = 2 |x0|."""
    return VortexProblem(mu=4.0, x0=(2.0, 0.0))


@pytest.fixture
def prob_weak() -> VortexProblem:
    """Weak drift at the start point; the synthesis workhorse."""
    return VortexProblem(mu=1.8, x0=(3.0, 0.0))


@pytest.fixture
def prob_scan() -> VortexProblem:
    """Weak-drift instance used by the conjugate-point scans."""
    return VortexProblem(mu=2.0, x0=(8.0 / 3.0, 0.0))


def assert_close(actual, expected, tol, label=""):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    err = float(np.max(np.abs(actual - expected)))
    assert err <= tol, f"{label} error {err:.3e} > {tol:.1e} (got {actual}, want {expected})"
