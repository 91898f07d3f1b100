"""
tests/test_metrics.py
─────────────────────
Tests for the scaling statistics and the verdict helpers.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.metrics import (
    at_least, at_most, close_to, energy_envelope_constant, exponential_growth_rate, gronwall_rate,
    in_window, increasing_with, linear_speed, loglog_slope, ratio_growth, ratio_spread, relative_drift,
    scaled_ratios, strictly_increasing,
)
from core.models import ExperimentReport


class TestSlopesAndRatios:
    """Fits and scaled ratios"""

    def test_loglog_slope_of_power(self):
        """Test y = 3ε^{4.5} has slope 4.5"""
        eps = [0.05, 0.0707, 0.1, 0.141, 0.2]
        assert loglog_slope(eps, [3.0 * e ** 4.5 for e in eps]) == pytest.approx(4.5)

    def test_loglog_slope_rejects_bad_data(self):
        """Test non-positive values and single points are rejected"""
        with pytest.raises(ValueError):
            loglog_slope([0.1, 0.2], [1.0, 0.0])
        with pytest.raises(ValueError):
            loglog_slope([0.1], [1.0])

    def test_scaled_ratios(self):
        """Test y/ε^q elementwise"""
        np.testing.assert_allclose(scaled_ratios([0.5, 0.25], [0.25, 0.0625], 0.5), [1.0, 1.0])

    def test_ratio_growth(self):
        """Test growth is measured against the ratio at the largest ε"""
        assert ratio_growth([1.0, 2.0, 4.0], [0.05, 0.1, 0.2]) == pytest.approx(1.0)
        assert ratio_growth([8.0, 2.0, 1.0], [0.05, 0.1, 0.2]) == pytest.approx(8.0)
        assert ratio_growth([1.0, 0.0], [0.1, 0.2]) == math.inf

    def test_ratio_spread(self):
        """Test max/min, infinite for non-positive values"""
        assert ratio_spread([2.0, 4.0, 3.0]) == pytest.approx(2.0)
        assert ratio_spread([1.0, 0.0]) == math.inf
        assert ratio_spread([]) == math.inf


class TestMonotonicity:
    """Ordering checks"""

    def test_strictly_increasing(self):
        """Test ties break strict monotonicity"""
        assert strictly_increasing([1.0, 2.0, 3.0])
        assert not strictly_increasing([1.0, 1.0, 3.0])

    def test_increasing_with_keys(self):
        """Test values are ordered by their keys first"""
        assert increasing_with([0.3, 0.1, 0.2], [0.2, 0.05, 0.1])
        assert not increasing_with([0.1, 0.3], [0.2, 0.05])


class TestEnvelopes:
    """Gronwall rates and the energy-type envelope"""

    def test_gronwall_rate_recovers_exponent(self):
        """Test err = e^{2ε³t} gives C = 2"""
        eps = 0.1
        t = np.linspace(0.0, 1000.0, 11)
        assert gronwall_rate(t, np.exp(2.0 * eps ** 3 * t), eps) == pytest.approx(2.0)

    def test_gronwall_rate_of_decay(self):
        """Test decaying errors give C = 0"""
        assert gronwall_rate([0.0, 1.0, 2.0], [1.0, 0.5, 0.25], 0.1) == 0.0

    def test_gronwall_rate_from_zero(self):
        """Test a zero start is infinite unless the error stays zero"""
        assert gronwall_rate([0.0, 1.0], [0.0, 1e-3], 0.1) == math.inf
        assert gronwall_rate([0.0, 1.0], [0.0, 0.0], 0.1) == 0.0

    def test_envelope_constant_zero_when_bounded(self):
        """Test a non-increasing 𝒬 needs no envelope"""
        assert energy_envelope_constant([0.0, 1.0, 2.0], [1.0, 0.9, 0.8], 0.1) == 0.0

    def test_envelope_constant_is_tight(self):
        """Test the fitted C makes the envelope touch the data"""
        eps = 0.1
        t = np.linspace(0.0, 2000.0, 21)
        c_true = 3.0
        q = (0.01 + c_true * eps ** 4.5 * t) * np.exp(c_true * eps ** 3 * t)
        assert energy_envelope_constant(t, q, eps) == pytest.approx(c_true, rel=1e-8)

    def test_envelope_constant_unbounded(self):
        """Test growth no admissible C covers is reported as infinite"""
        assert energy_envelope_constant([0.0, 1e-12], [1.0, 1e6], 0.1, c_max=1e3) == math.inf


class TestDriftAndGrowth:
    """Invariant drift, growth rates and speeds"""

    def test_relative_drift(self):
        """Test the largest deviation over the initial value"""
        assert relative_drift([2.0, 2.1, 1.8]) == pytest.approx(0.1)
        assert relative_drift([0.0, 0.5, -1.0]) == pytest.approx(1.0)

    def test_exponential_growth_rate(self):
        """Test the trailing half of e^{0.3t} has rate 0.3"""
        t = np.linspace(0.0, 10.0, 41)
        assert exponential_growth_rate(t, 1e-4 * np.exp(0.3 * t)) == pytest.approx(0.3)
        assert exponential_growth_rate([0.0, 1.0], [0.0, 0.0]) == 0.0

    def test_linear_speed(self):
        """Test the least-squares slope of position"""
        t = np.linspace(0.0, 1.0, 21)
        assert linear_speed(t, 3.0 + 0.5 * t) == pytest.approx(0.5)


class TestVerdicts:
    """Verdict helpers record onto the report"""

    def test_bounds(self):
        """Test at_most / at_least record measured values and tolerances"""
        report = ExperimentReport(name="unit")
        assert at_most(report, "small", 1e-9, 1e-8)
        assert not at_least(report, "large", 0.5, 1.0)
        assert not at_most(report, "nan", float("nan"), 1.0)
        assert [v.passed for v in report.verdicts] == [True, False, False]
        assert report.verdicts[0].measured == 1e-9 and report.verdicts[0].tolerance == 1e-8
        assert report.verdicts[2].measured is None
        assert not report.all_passed

    def test_window(self):
        """Test the window is closed"""
        report = ExperimentReport(name="unit")
        assert in_window(report, "slope", 4.0, 4.0, 5.0)
        assert not in_window(report, "slope", 5.1, 4.0, 5.0)

    def test_close_to(self):
        """Test the recorded measure is the relative deviation"""
        report = ExperimentReport(name="unit")
        assert close_to(report, "speed", 1.004, 1.0, 0.005)
        assert report.verdicts[0].measured == pytest.approx(0.004)
        assert not close_to(report, "speed", 1.01, 1.0, 0.005)
        assert close_to(report, "zero", 1e-12, 0.0, 1e-10)
