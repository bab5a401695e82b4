"""Shared test fixtures and helpers."""

from __future__ import annotations

import numpy as np
import pytest

from rmt_noise.rng import EXP_TEST, substream

TEST_SEED = 0xA11CE


def stream(*key: int) -> np.random.Generator:
    """Deterministic generator for a test, keyed off the shared test tag."""
    return substream(TEST_SEED, EXP_TEST, *key)


def random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2.0


@pytest.fixture
def rng() -> np.random.Generator:
    return stream(0)
