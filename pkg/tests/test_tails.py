import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandit_tails.errors import ConfigError, InsufficientData
from bandit_tails.tails import TailCurve, deviation_grid, tail_curve, tail_exponent


def exact_curve(x, p, exceedances=10**4, R=10**6):
    x = np.asarray(x, float)
    return TailCurve(arm=1, x=x, p_hat=np.asarray(p, float),
                     exceedances=np.full(len(x), exceedances), R=R)


class TestGrid:
    def test_window(self):
        g = deviation_grid(10**4, 0.5, 40)
        assert g.lo == pytest.approx(27.95204070261588, abs=1e-9)
        assert g.hi == pytest.approx(5000.0, abs=1e-9)
        assert len(g.x) == 40 and (np.diff(g.x) > 0).all()

    def test_log_spaced(self):
        g = deviation_grid(10**5, 0.3, 25)
        assert np.allclose(np.diff(np.log(g.x)), np.log(g.hi / g.lo) / 24)

    def test_empty_window(self):
        with pytest.raises(ConfigError):
            deviation_grid(10, 0.9, 20)

    @pytest.mark.parametrize("T, gamma, m", [(2, 0.5, 20), (100, 0.0, 20), (100, 1.0, 20), (100, 0.5, 5)])
    def test_bad_arguments(self, T, gamma, m):
        with pytest.raises(ConfigError):
            deviation_grid(T, gamma, m)


class TestCurve:
    def test_all_zero(self):
        c = tail_curve(np.zeros((50, 2), dtype=int), 1, deviation_grid(10**4, 0.5, 20))
        assert (c.p_hat == 0).all()

    def test_single_record_step(self):
        g = deviation_grid(10**4, 0.5, 20)
        n = int(0.5 * 10**4)
        c = tail_curve(np.array([[10**4 - n, n]]), 1, g)
        assert (c.p_hat == (g.x < n)).all()
        assert c.p_hat[-1] == 0.0

    def test_strict_inequality(self):
        c = tail_curve(np.array([[0, 30], [0, 40]]), 1, np.array([30.0, 35.0, 40.0]))
        assert list(c.exceedances) == [1, 1, 0]

    def test_synthetic_power_law(self):
        R = 10**5
        n = R / np.arange(1, R + 1)
        counts = np.column_stack([np.zeros(R), n])
        g = deviation_grid(10**5, 0.5, 30)
        c = tail_curve(counts, 1, g)
        assert ((c.ci_lo <= 1 / g.x) & (1 / g.x <= c.ci_hi)).all()

    def test_csv(self):
        c = tail_curve(np.array([[0, 30], [0, 40]]), 1, np.array([30.0, 35.0]))
        buf = io.StringIO()
        c.write_csv(buf)
        assert buf.getvalue().splitlines()[0] == "x,p_hat,ci_lo,ci_hi,exceedances"


class TestExponent:
    def test_inverse_power(self):
        x = np.geomspace(10, 1000, 15)
        assert tail_exponent(exact_curve(x, 1 / x)).slope == pytest.approx(-1.0, abs=1e-9)

    def test_scaled_square(self):
        x = np.geomspace(10, 1000, 15)
        est = tail_exponent(exact_curve(x, 3.0 * x**-2.0))
        assert est.slope == pytest.approx(-2.0, abs=1e-9)
        assert est.intercept == pytest.approx(math.log(3.0), abs=1e-9)

    def test_weighted(self):
        x = np.geomspace(10, 1000, 15)
        assert tail_exponent(exact_curve(x, 0.5 / x), weighted=True).slope == pytest.approx(-1.0, abs=1e-9)

    def test_insufficient(self):
        x = np.geomspace(10, 1000, 5)
        c = TailCurve(1, x, 1 / x, np.array([100, 60, 10, 0, 0]), 1000)
        with pytest.raises(InsufficientData):
            tail_exponent(c)

    def test_uses_only_reliable_points(self):
        x = np.geomspace(10, 1000, 6)
        c = TailCurve(1, x, 1 / x, np.array([500, 200, 80, 50, 10, 1]), 10**4)
        est = tail_exponent(c)
        assert est.n_points == 4 and est.x_hi == pytest.approx(x[3])
        assert est.to_dict()["arm"] == 2


# --- invariants -------------------------------------------------------------------


@settings(max_examples=200)
@given(st.lists(st.integers(0, 10**4), min_size=1, max_size=300), st.integers(10, 60))
def test_curve_nonincreasing(ns, m):
    counts = np.column_stack([np.full(len(ns), 10**4) - ns, ns])
    c = tail_curve(counts, 1, deviation_grid(10**4, 0.5, m))
    assert (np.diff(c.p_hat) <= 0).all()
    assert (c.exceedances <= len(ns)).all()
    assert ((c.ci_lo <= c.p_hat + 1e-12) & (c.p_hat <= c.ci_hi + 1e-12)).all()


@settings(max_examples=200)
@given(st.floats(-4, -0.2), st.floats(1e-3, 1e3), st.floats(-1, 1))
def test_slope_invariant_to_rescaling(alpha, scale, noise_seed):
    x = np.geomspace(20, 2000, 12)
    rng = np.random.default_rng(int(abs(noise_seed) * 1e6))
    p = x**alpha * np.exp(0.05 * rng.standard_normal(12))
    p = p / p.max() * 0.5
    a = tail_exponent(exact_curve(x, p))
    b = tail_exponent(exact_curve(x, p * scale))
    assert a.slope == pytest.approx(b.slope, abs=1e-9)
    assert b.intercept - a.intercept == pytest.approx(math.log(scale), abs=1e-9)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.sampled_from([50, 200, 1000, 5000]))
def test_wilson_coverage(seed, R):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.001, 0.999, size=2000)
    k = rng.binomial(R, p)
    c = TailCurve.from_counts(0, np.ones(len(k)), k, R)
    assert np.mean((c.ci_lo <= p) & (p <= c.ci_hi)) >= 0.93
