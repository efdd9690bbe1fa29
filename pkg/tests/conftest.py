import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bandit_tails.dist import FiniteAlphabet, FiniteDist

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

BINARY = FiniteAlphabet((0.0, 1.0))


@pytest.fixture
def binary():
    return BINARY


def ber(p: float) -> FiniteDist:
    return FiniteDist.bernoulli(p)


def random_law(rng: np.random.Generator, max_size: int = 6, zero_prob: float = 0.3):
    """A random law on a random subset of an 11-point grid in [0, 1]."""
    s = int(rng.integers(2, max_size + 1))
    pts = np.sort(rng.choice(np.linspace(0.0, 1.0, 11), s, replace=False))
    w = rng.dirichlet(np.ones(s))
    if rng.random() < zero_prob:
        w[rng.integers(s)] = 0.0
        w /= w.sum()
    return FiniteDist(tuple(pts), tuple(w)), FiniteAlphabet(tuple(pts))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(mod.RESULTS):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
