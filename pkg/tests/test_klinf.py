import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandit_tails.dist import BoundedSupport, FiniteAlphabet, FiniteDist, MomentBounded, kl
from bandit_tails.errors import InfeasibleQuery, InvalidQuery
from bandit_tails.klinf import (
    klinf,
    klinf_bounded,
    klinf_finite,
    klinf_moment,
    klinf_oracle,
)

from .conftest import BINARY, ber, random_law
from .strategies import law_and_alphabet, laws_on

KL_03_05 = 0.0822828785050518464
LOG2 = 0.693147180559945309


def bernoulli_kl(p, q):
    return p * math.log(p / q) + (1 - p) * math.log((1 - p) / (1 - q))


class TestFinite:
    def test_bernoulli(self):
        res = klinf_finite(ber(0.3), 0.5, BINARY)
        assert res.value == pytest.approx(KL_03_05, abs=1e-12)
        assert res.minimizer.weights == pytest.approx((0.5, 0.5), abs=1e-9)

    def test_below_mean(self):
        assert klinf_finite(ber(0.5), 0.4, BINARY).value == 0.0

    def test_point_mass_at_bottom(self):
        res = klinf_finite(FiniteDist.point(0.0), 0.5, BINARY)
        assert res.value == pytest.approx(LOG2, abs=1e-12)
        assert res.minimizer.weights == pytest.approx((0.5, 0.5), abs=1e-9)

    def test_beyond_support(self):
        res = klinf_finite(ber(0.3), 1.2, BINARY)
        assert res.value == math.inf and res.minimizer is None

    def test_at_top_without_full_mass(self):
        assert klinf_finite(ber(0.3), 1.0, BINARY).value == math.inf

    def test_at_top_with_full_mass(self):
        assert klinf_finite(FiniteDist.point(1.0), 1.0, BINARY).value == 0.0

    def test_support_outside_alphabet(self):
        with pytest.raises(InvalidQuery):
            klinf_finite(FiniteDist.point(0.5), 0.7, BINARY)

    def test_alphabet_larger_than_support(self):
        a = FiniteAlphabet((0.0, 0.5, 1.0))
        p = FiniteDist((0.0, 0.5), (0.5, 0.5))
        res = klinf_finite(p, 0.6, a)
        assert res.value == pytest.approx(klinf_oracle(p, 0.6, a), abs=1e-7)
        assert res.minimizer.mass(1.0) > 0

    def test_closed_form_grid(self):
        for p in np.linspace(0.05, 0.9, 8):
            for x in np.linspace(p + 0.01, 0.99, 6):
                got = klinf_finite(ber(p), x, BINARY).value
                assert got == pytest.approx(bernoulli_kl(p, x), abs=1e-10)


class TestBounded:
    def test_bernoulli(self):
        assert klinf_bounded(ber(0.3), 0.5, 0.0, 1.0).value == pytest.approx(KL_03_05, abs=1e-12)

    def test_at_mean(self):
        assert klinf_bounded(FiniteDist.uniform((0.0, 0.5, 1.0)), 0.5, 0, 1).value == 0.0

    def test_interior_point_mass(self):
        p = FiniteDist.point(0.5)
        res = klinf_bounded(p, 0.75, 0.0, 1.0)
        assert res.value == pytest.approx(LOG2, abs=1e-12)
        assert res.minimizer.weights == pytest.approx((0.5, 0.5), abs=1e-9)
        assert klinf_oracle(p, 0.75, BoundedSupport(0, 1)) == pytest.approx(LOG2, abs=1e-6)

    def test_equals_finite_on_support_plus_top(self):
        p = FiniteDist((0.1, 0.4, 0.7), (0.3, 0.3, 0.4))
        a = FiniteAlphabet((0.1, 0.4, 0.7, 1.0))
        for x in (0.5, 0.8, 0.95):
            assert klinf_bounded(p, x, 0, 1).value == pytest.approx(klinf_finite(p, x, a).value, abs=1e-12)

    def test_beyond_b(self):
        assert klinf_bounded(ber(0.3), 1.5, 0, 1).value == math.inf

    def test_outside_interval(self):
        with pytest.raises(InvalidQuery):
            klinf_bounded(FiniteDist.point(2.0), 2.5, 0, 1)


class TestMoment:
    def test_below_mean(self):
        assert klinf_moment(ber(0.3), 0.2, 1.0, 1.0).value == 0.0

    def test_inactive_constraint_matches_bounded(self):
        assert klinf_moment(ber(0.3), 0.5, 1.0, 1.0).value == pytest.approx(KL_03_05, abs=1e-6)

    def test_unreachable_mean(self):
        with pytest.raises(InfeasibleQuery):
            klinf_moment(ber(0.3), 1.5, 1.0, 1.0)

    def test_constraint_active_beyond_one(self):
        res = klinf_moment(ber(0.3), 1.2, 2.0, 1.0)
        assert math.isfinite(res.value) and res.value > 0
        q = res.minimizer
        assert q.mean >= 1.2 - 1e-7
        assert q.moment(2.0) <= 2.0 + 1e-7
        assert max(q.atoms) > 1.0

    def test_nonincreasing_in_B(self):
        values = [klinf_moment(ber(0.3), 0.9, B, 1.0).value for B in (1.0, 1.5, 2.0, 3.0)]
        assert all(b <= a + 1e-7 for a, b in zip(values, values[1:]))

    def test_violating_moment(self):
        with pytest.raises(InvalidQuery):
            klinf_moment(FiniteDist.point(2.0), 2.5, 1.0, 1.0)

    def test_dispatch(self):
        assert klinf(ber(0.3), 0.5, MomentBounded(1.0, 1.0)).value == pytest.approx(KL_03_05, abs=1e-6)


class TestOracle:
    def test_below_mean(self):
        assert klinf_oracle(ber(0.6), 0.5, BINARY) == 0.0

    def test_point_mass(self):
        assert klinf_oracle(FiniteDist.point(0.0), 0.5, BINARY) == pytest.approx(LOG2, abs=1e-8)

    def test_agrees_with_dual(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            p, a = random_law(rng)
            x = rng.uniform(p.mean, max(a.points))
            assert klinf_finite(p, x, a).value == pytest.approx(klinf_oracle(p, x, a), abs=1e-6)


# --- invariants -------------------------------------------------------------------


@st.composite
def queries(draw):
    p, a = draw(law_and_alphabet())
    x = draw(st.floats(min(a.points), max(a.points)))
    return p, a, x


def value(p, x, a):
    return klinf_finite(p, x, a).value


@settings(max_examples=200)
@given(queries(), st.floats(0, 1))
def test_monotone_in_x(q, t):
    p, a, x = q
    x2 = x + t * (max(a.points) - x)
    assert value(p, x, a) <= value(p, x2, a) + 1e-10


@settings(max_examples=200)
@given(queries(), st.floats(0, 1))
def test_midpoint_convexity(q, t):
    p, a, x1 = q
    x2 = x1 + t * (max(a.points) - x1)
    v1, v2 = value(p, x1, a), value(p, x2, a)
    if math.isfinite(v1) and math.isfinite(v2):
        assert value(p, 0.5 * (x1 + x2), a) <= 0.5 * (v1 + v2) + 1e-8


@settings(max_examples=200)
@given(st.data())
def test_feasible_dominance(data):
    p, a = data.draw(law_and_alphabet())
    q = data.draw(laws_on(a, allow_zero=False))
    x = data.draw(st.floats(min(a.points), q.mean))
    assert value(p, x, a) <= kl(p, q) + 1e-8


@settings(max_examples=200)
@given(queries())
def test_class_nesting(q):
    p, a, x = q
    assert value(p, x, a) >= klinf_bounded(p, x, a.lower, a.upper).value - 1e-8


@settings(max_examples=200)
@given(queries())
def test_primal_dual_agreement(q):
    p, a, x = q
    res = klinf_finite(p, x, a)
    if math.isfinite(res.value):
        assert res.minimizer.mean >= x - 1e-9
        assert abs(kl(p, res.minimizer) - res.value) <= 1e-6
        assert set(res.minimizer.atoms) <= set(a.points)


@settings(max_examples=200)
@given(law_and_alphabet(), st.floats(0, 1))
def test_zero_law(pa, t):
    p, a = pa
    m = p.mean
    below = min(a.lower + t * (m - a.lower), m)
    assert value(p, below, a) == 0.0
    assert value(p, m, a) == 0.0
    gap = a.upper - m
    if gap > 2e-6:
        above = m + 1e-6 + t * (gap - 1e-6)
        assert value(p, above, a) > 0.0
