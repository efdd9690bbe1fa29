import csv
import io
import math

import numpy as np
import pytest
from scipy.stats import binom

from bandit_tails.assumptions import (
    AssumptionReport,
    check_assumption1,
    check_assumption2,
    running_maxima,
    sanov_bound,
)
from bandit_tails.dist import FiniteDist, MomentBounded
from bandit_tails.errors import ConfigError, InsufficientData
from bandit_tails.klinf import klinf_oracle

from .conftest import BINARY, ber

KL_03_05 = 0.0822828785050518464


class TestSanov:
    def test_value(self):
        assert sanov_bound(2, 100, 0.08228) == pytest.approx(2.72438042061804466, rel=1e-12)

    def test_monotone(self):
        assert sanov_bound(2, 100, 0.1) < sanov_bound(2, 100, 0.05)
        assert sanov_bound(3, 100, 0.1) > sanov_bound(2, 100, 0.1)

    def test_dominates_exact_probability(self):
        # P(mean of 200 draws of Ber(0.3) >= 0.5), computed exactly
        n = 200
        exact = binom.sf(n // 2 - 1, n, 0.3)
        assert 0 < exact <= sanov_bound(2, n, KL_03_05)

    @pytest.mark.parametrize("n", [30, 200])
    def test_dominates_monte_carlo(self, n):
        rate = klinf_oracle(ber(0.3), 0.5, BINARY)
        rng = np.random.default_rng(5)
        means = rng.binomial(n, 0.3, size=200_000) / n
        assert np.mean(means >= 0.5) <= sanov_bound(2, n, rate)

    def test_zero_rate(self):
        assert sanov_bound(3, 9, 0.0) == pytest.approx(1000.0, rel=1e-14)


class TestAssumption1:
    def test_bernoulli_passes(self):
        rep = check_assumption1(ber(0.5), BINARY, n_max=200, paths=5000, base_seed=1)
        assert rep.verdict
        assert rep.bound == pytest.approx([math.exp(-x) for x in (1, 2, 3, 4)])
        assert all(a >= b for a, b in zip(rep.frequency, rep.frequency[1:]))
        assert rep.audit.ok

    def test_zero_threshold_bound_is_one(self):
        rep = check_assumption1(ber(0.5), BINARY, n_max=50, paths=1000, x_grid=(0.0, 1.0))
        assert rep.bound[0] == 1.0

    def test_point_mass_never_exceeds(self):
        rep = check_assumption1(FiniteDist.point(1.0), BINARY, n_max=50, paths=1000)
        assert rep.frequency == [0.0, 0.0, 0.0, 0.0]

    def test_running_max_nondecreasing_in_horizon(self):
        a = running_maxima(ber(0.4), BINARY, n_max=50, paths=500, base_seed=3)
        b = running_maxima(ber(0.4), BINARY, n_max=150, paths=500, base_seed=3)
        assert np.all(b >= a)

    def test_workers_do_not_change_results(self):
        a = running_maxima(ber(0.4), BINARY, n_max=60, paths=1000, base_seed=9, workers=1)
        b = running_maxima(ber(0.4), BINARY, n_max=60, paths=1000, base_seed=9, workers=2)
        np.testing.assert_array_equal(a, b)

    def test_rejects_small_runs(self):
        with pytest.raises(ConfigError):
            check_assumption1(ber(0.5), BINARY, n_max=5)
        with pytest.raises(ConfigError):
            check_assumption1(ber(0.5), BINARY, paths=10)

    def test_moment_class_rejected(self):
        with pytest.raises(ConfigError):
            check_assumption1(ber(0.5), MomentBounded(2, 1), n_max=20, paths=1000)


class TestAssumption2:
    def test_bernoulli_rate_positive(self):
        rep = check_assumption2(ber(0.5), BINARY, 0.2, paths=20_000, base_seed=2)
        assert rep.reference == pytest.approx(0.5 * math.log(0.5 / 0.7) + 0.5 * math.log(0.5 / 0.3))
        assert rep.c_hat > 0 and rep.c_envelope > 0
        assert rep.verdict and rep.audit.ok

    def test_monotone_cells(self):
        rep = check_assumption2(ber(0.5), BINARY, 0.2, paths=20_000, base_seed=2)
        freq = {(c["n"], c["dd"]): c["frequency"] for c in rep.cells}
        for n in (50, 100, 200):
            row = [freq[(n, dd)] for dd in (0.01, 0.02, 0.05)]
            assert row[0] >= row[1] >= row[2]

    def test_gap_above_reference_never_violated(self):
        rep = check_assumption2(ber(0.5), BINARY, 0.2, d_grid=(0.01, 1.0), paths=5000)
        assert all(c["violations"] == 0 for c in rep.cells if c["dd"] == 1.0)

    def test_point_mass_has_no_violations(self):
        with pytest.raises(InsufficientData):
            check_assumption2(FiniteDist.point(0.0), BINARY, 0.5, paths=2000)

    def test_infinite_reference_rejected(self):
        with pytest.raises(ConfigError):
            check_assumption2(ber(0.5), BINARY, 0.6, paths=1000)


def test_combined_report_csv():
    rep = AssumptionReport(ber(0.5), BINARY)
    rep.assumption1 = check_assumption1(ber(0.5), BINARY, n_max=50, paths=1000)
    rep.assumption2 = check_assumption2(ber(0.5), BINARY, 0.2, paths=5000)
    buf = io.StringIO()
    rep.write_csv(buf)
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert [r["assumption"] for r in rows] == ["1"] * 4 + ["2"] * 9
    assert rep.to_dict()["verdict"] == rep.verdict
