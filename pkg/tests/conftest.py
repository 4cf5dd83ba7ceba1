"""Shared fixtures for the nskd test suite."""

from fractions import Fraction

import numpy as np
import pytest

from nskd.boxcore import (ConditionalBox, deterministic_strategies, make_deterministic_box,
                          make_isotropic_box, make_pr_box)

TENTH = Fraction(1, 10)
EXACT_ERRORS = [Fraction(1, 20), Fraction(1, 10), Fraction(1, 5), Fraction(1, 4)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def iso_tenth():
    return make_isotropic_box(TENTH)


def random_nonsignaling_box(rng: np.random.Generator) -> ConditionalBox:
    """Exact mixture of the 16 deterministic strategies and the PR box."""
    components = [make_deterministic_box(*s) for s in deterministic_strategies()] + [make_pr_box()]
    weights = [int(w) for w in rng.integers(0, 10, size=len(components))]
    weights[-1] += 1
    total = sum(weights)
    probs = [Fraction(0)] * 16
    for w, box in zip(weights, components):
        if w:
            probs = [acc + Fraction(w, total) * p for acc, p in zip(probs, box.probs)]
    return ConditionalBox(1, tuple(probs))


@pytest.fixture
def random_box():
    return random_nonsignaling_box
