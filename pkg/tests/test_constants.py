import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bandit_tails._kernels as kern
from bandit_tails.constants import (
    _simplex_grid,
    bernoulli_ratio,
    discrimination_ratio,
    is_discrimination_equivalent,
    lai_robbins_constant,
    tail_exponent_theory,
    theorem3_exponent,
)
from bandit_tails.dist import BanditInstance, BoundedSupport, FiniteAlphabet, FiniteDist
from bandit_tails.errors import DegenerateInstance, DomainError, InvalidQuery
from bandit_tails.klinf import klinf_finite

from .conftest import BINARY, ber

RATIO_07_03 = 3.3755463476928384608


def near_equivalent_pair():
    """Best arm = KL_inf projection of Ber(0.3) at level 0.5 on {0, 1, 2}."""
    alphabet = FiniteAlphabet((0.0, 1.0, 2.0))
    low = FiniteDist((0.0, 1.0, 2.0), (0.7, 0.3, 0.0))
    best = klinf_finite(low, 0.5, alphabet).minimizer
    second = FiniteDist((0.0, 1.0, 2.0), (0.501, 0.499, 0.0))
    return best, second, alphabet


class TestLaiRobbins:
    def test_bernoulli(self):
        inst = BanditInstance((ber(0.5), ber(0.3)), BINARY)
        assert lai_robbins_constant(inst, 1) == pytest.approx(12.15319660867970142, rel=1e-10)

    def test_point_mass(self):
        inst = BanditInstance((ber(0.5), FiniteDist.point(0.0)), BINARY)
        assert lai_robbins_constant(inst, 1) == pytest.approx(1.442695040888963407, rel=1e-10)

    def test_near_tie_is_large_and_finite(self):
        inst = BanditInstance((ber(0.3 + 1e-9), ber(0.3)), BINARY)
        c = lai_robbins_constant(inst, 1)
        assert math.isfinite(c) and c > 1e12

    def test_optimal_arm(self):
        inst = BanditInstance((ber(0.5), ber(0.3)), BINARY)
        with pytest.raises(DegenerateInstance):
            lai_robbins_constant(inst, 0)


class TestRatio:
    def test_point_mass_at_top_is_infinite(self):
        res = discrimination_ratio(FiniteDist.point(1.0), 0.5, BINARY)
        assert res.value == math.inf and res.argmin is None

    def test_bernoulli_pair(self):
        res = discrimination_ratio(ber(0.7), 0.3, BINARY)
        assert res.value == pytest.approx(RATIO_07_03, abs=1e-8)
        assert res.value > 1.01
        assert res.argmin.mean < 0.3
        assert set(res.argmin.atoms) <= {0.0, 1.0}
        assert res.slack == 1e-4 and set(res.trend) == {1e-2, 1e-3, 1e-4}

    def test_one_dimensional_oracle(self):
        assert bernoulli_ratio(0.7, 0.3) == pytest.approx(RATIO_07_03, abs=1e-10)

    def test_invalid_level(self):
        with pytest.raises(InvalidQuery):
            discrimination_ratio(ber(0.3), 0.5, BINARY)

    def test_argmin_consistency(self):
        nu = FiniteDist((0.0, 0.4, 1.0), (0.2, 0.3, 0.5))
        res = discrimination_ratio(nu, 0.4, FiniteAlphabet((0.0, 0.4, 1.0)))
        from bandit_tails.dist import kl

        t = res.argmin
        direct = kl(t, nu) / klinf_finite(t, 0.4, FiniteAlphabet((0.0, 0.4, 1.0))).value
        assert direct - res.value <= 1e-6

    def test_refinement_never_worse_than_grid(self):
        nu = FiniteDist((0.0, 0.3, 1.0), (0.3, 0.3, 0.4))
        mu = 0.45
        res = discrimination_ratio(nu, mu, BoundedSupport(0, 1))
        grid = _simplex_grid(3, 200)
        best = kern.ratio_grid(grid, np.array(nu.atoms), np.array(nu.weights), mu, 1.0, 1e-4).min()
        assert res.value <= best + 1e-10

    def test_near_equivalent(self):
        best, second, alphabet = near_equivalent_pair()
        v = discrimination_ratio(best, second.mean, alphabet).value
        assert 1.0 - 1e-8 <= v <= 1.02


@settings(max_examples=50)
@given(st.floats(0.05, 0.95), st.floats(0.02, 0.9))
def test_simplex_search_matches_one_dimensional(p, frac):
    mu = frac * p
    if mu < 2e-4:
        return
    general = discrimination_ratio(ber(p), mu, BINARY).value
    assert general == pytest.approx(bernoulli_ratio(p, mu), abs=1e-4)


@settings(max_examples=50)
@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3), st.floats(0.05, 0.95))
def test_ratio_at_least_one(w, frac):
    nu = FiniteDist((0.0, 0.5, 1.0), tuple(np.array(w) / sum(w)))
    mu = frac * nu.mean
    res = discrimination_ratio(nu, mu, FiniteAlphabet((0.0, 0.5, 1.0)))
    if math.isfinite(res.value):
        assert res.value >= 1.0 - 1e-8


class TestExponents:
    def test_theorem3(self):
        assert [theorem3_exponent(i) for i in (2, 3, 5)] == [-1, -2, -4]
        with pytest.raises(DomainError):
            theorem3_exponent(1)

    def test_two_arms(self):
        inst = BanditInstance((ber(0.7), ber(0.3)), BINARY)
        assert tail_exponent_theory(inst, 2) == pytest.approx(-RATIO_07_03, abs=1e-8)

    def test_point_mass_best_arm(self):
        inst = BanditInstance((FiniteDist.point(1.0), ber(0.3)), BINARY)
        assert tail_exponent_theory(inst, 2) == -math.inf

    def test_near_equivalent_instance(self):
        best, second, alphabet = near_equivalent_pair()
        inst = BanditInstance((best, second), alphabet)
        assert tail_exponent_theory(inst, 2) == pytest.approx(-1.0, abs=0.02)

    def test_nonincreasing_in_rank(self):
        inst = BanditInstance((ber(0.3), ber(0.8), ber(0.6), ber(0.45)), BINARY)
        values = [tail_exponent_theory(inst, i) for i in (2, 3, 4)]
        assert values[0] >= values[1] >= values[2]
        assert values[1] <= -2 and values[2] <= -3


class TestEquivalence:
    def test_bernoulli_pair_not_equivalent(self):
        rep = is_discrimination_equivalent([(ber(0.7), ber(0.3))], BINARY)
        assert not rep.equivalent and rep.values[0] > 1 + rep.tol

    def test_point_mass_not_equivalent(self):
        rep = is_discrimination_equivalent([(FiniteDist.point(1.0), ber(0.3))], BINARY)
        assert not rep.equivalent and rep.values[0] == math.inf

    def test_empty_is_vacuous(self):
        with pytest.warns(UserWarning):
            rep = is_discrimination_equivalent([], BINARY)
        assert rep.equivalent

    def test_near_equivalent(self):
        best, second, alphabet = near_equivalent_pair()
        assert is_discrimination_equivalent([(best, second)], alphabet, tol=0.02).equivalent

    def test_order_checked(self):
        with pytest.raises(InvalidQuery):
            is_discrimination_equivalent([(ber(0.3), ber(0.7))], BINARY)
