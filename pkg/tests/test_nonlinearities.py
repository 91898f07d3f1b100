"""
tests/test_nonlinearities.py
────────────────────────────
Tests for the lattice force, its expansions and the KdV fluxes.

Tests cover:
  1. Closed-form values against high-precision oracles
  2. Cancellation-free splits Ṽ′ = w + N_ε = w + ε²g + M_ε
  3. Derivatives against finite differences
  4. Small-ε limit of the cubic remainder M_ε
  5. Domain errors and the power family
"""

import math
import os
import sys

import mpmath
import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.exceptions import DomainError
from core.models import ModelParams, NonlinearityFamily
from core.nonlinearities import (
    force, force_derivatives, g_log, kdv_flux, lattice_force, m_epsilon, n_epsilon, n_epsilon_derivative,
    nonlinear_remainder, potential, power_flux, power_force, power_force_derivatives, power_potential, vlogabsv,
    vlogv,
)

mpmath.mp.dps = 50

W_GRID = np.linspace(-0.9, 10.0, 2001)
EPSILONS = (1e-3, 0.05, 0.2)


def _oracle_force(w: float, eps: float) -> float:
    return float(mpmath.power(1 + mpmath.mpf(w), 1 + mpmath.mpf(eps) ** 2) - 1)


def _oracle_potential(w: float, eps: float) -> float:
    a = 2 + mpmath.mpf(eps) ** 2
    return float((mpmath.power(1 + mpmath.mpf(w), a) - 1) / a - mpmath.mpf(w))


class TestLatticeForce:
    """Ṽ_ε′ and Ṽ_ε against mpmath"""

    def test_force_matches_oracle(self):
        """Test force(0.5, 0.1) = 1.5^1.01 − 1"""
        assert force(0.5, 0.1) == pytest.approx(_oracle_force(0.5, 0.1), rel=1e-14)

    def test_force_small_argument(self):
        """Test force keeps full relative precision near w = 0"""
        for w in (1e-12, -1e-9, 3e-6):
            assert force(w, 0.2) == pytest.approx(_oracle_force(w, 0.2), rel=1e-12)

    def test_potential_matches_oracle(self):
        """Test potential(0.3, 0.15) against the closed form"""
        assert potential(0.3, 0.15) == pytest.approx(_oracle_potential(0.3, 0.15), rel=1e-13)

    def test_potential_small_argument(self):
        """Test potential ≈ w²/2 without cancellation for tiny w"""
        w = 1e-7
        assert potential(w, 0.1) == pytest.approx(_oracle_potential(w, 0.1), rel=1e-6)
        assert potential(0.0, 0.1) == 0.0

    def test_potential_full_precision_near_zero(self):
        """Test potential keeps 1e−14 relative accuracy for |w| down to 1e−12"""
        for w in (1e-9, 1e-12, -1e-9, 5e-3):
            for eps in (0.1, 0.2):
                assert potential(w, eps) == pytest.approx(_oracle_potential(w, eps), rel=1e-14)
        values = potential(np.array([1e-12, 1e-9, 0.5]), 0.1)
        expected = [_oracle_potential(w, 0.1) for w in (1e-12, 1e-9, 0.5)]
        np.testing.assert_allclose(values, expected, rtol=1e-14)

    def test_potential_is_antiderivative_of_force(self):
        """Test centred differences of Ṽ reproduce Ṽ′"""
        h = 1e-5
        w = np.linspace(-0.5, 5.0, 41)
        fd = (potential(w + h, 0.1) - potential(w - h, 0.1)) / (2 * h)
        np.testing.assert_allclose(fd, force(w, 0.1), rtol=1e-6, atol=1e-9)

    def test_force_strictly_increasing(self):
        """Test Ṽ′ is increasing on (−1, ∞)"""
        for eps in EPSILONS:
            assert np.all(np.diff(force(W_GRID, eps)) > 0)

    def test_second_derivative_value(self):
        """Test Ṽ″(1) at ε = 0.2 equals 1.04·2^0.04"""
        assert force_derivatives(1.0, 0.2, 2) == pytest.approx(1.04 * 2 ** 0.04, rel=1e-14)

    def test_scalar_in_scalar_out(self):
        """Test scalar arguments return Python floats"""
        assert isinstance(force(0.1, 0.1), float)
        assert isinstance(force(np.array([0.1]), 0.1), np.ndarray)


class TestExpansions:
    """The splits w + N_ε and w + ε²g + M_ε"""

    def test_force_equals_linear_plus_remainder(self):
        """Test Ṽ′ = w + N_ε"""
        for eps in EPSILONS:
            lhs = force(W_GRID, eps)
            rhs = W_GRID + n_epsilon(W_GRID, eps)
            assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(1.0, np.abs(lhs)))

    def test_force_equals_kdv_split(self):
        """Test Ṽ′ = w + ε²g + M_ε"""
        for eps in EPSILONS:
            lhs = force(W_GRID, eps)
            rhs = W_GRID + eps ** 2 * g_log(W_GRID) + m_epsilon(W_GRID, eps)
            assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(1.0, np.abs(lhs)))

    def test_remainder_derivative(self):
        """Test N_ε′ = Ṽ″ − 1"""
        w = np.linspace(-0.8, 4.0, 31)
        np.testing.assert_allclose(n_epsilon_derivative(w, 0.1), force_derivatives(w, 0.1, 2) - 1.0,
                                   rtol=1e-12, atol=1e-15)

    def test_cubic_remainder_limit(self):
        """Test M_ε/ε⁴ → (1+w) log1p(w)²/2 as ε → 0"""
        eps = 1e-3
        w = np.array([-0.5, -0.1, 0.3, 1.0, 5.0])
        limit = (1.0 + w) * np.log1p(w) ** 2 / 2.0
        np.testing.assert_allclose(m_epsilon(w, eps) / eps ** 4, limit, rtol=1e-2)

    def test_cubic_remainder_is_small(self):
        """Test M_ε is of order ε⁴ on a bounded range"""
        w = np.linspace(-0.5, 2.0, 101)
        ratio = np.max(np.abs(m_epsilon(w, 0.05))) / np.max(np.abs(m_epsilon(w, 0.1)))
        assert ratio == pytest.approx(1 / 16, rel=0.05)


class TestDerivatives:
    """Higher derivatives against finite differences"""

    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
    def test_derivative_chain(self, eps):
        """Test orders 2, 3, 4 by centred differences of the previous order"""
        h = 1e-5
        w = np.linspace(-0.5, 5.0, 23)
        d2_fd = (force(w + h, eps) - force(w - h, eps)) / (2 * h)
        np.testing.assert_allclose(d2_fd, force_derivatives(w, eps, 2), rtol=1e-6)
        d3_fd = (force_derivatives(w + h, eps, 2) - force_derivatives(w - h, eps, 2)) / (2 * h)
        np.testing.assert_allclose(d3_fd, force_derivatives(w, eps, 3), rtol=1e-6)
        d4_fd = (force_derivatives(w + h, eps, 3) - force_derivatives(w - h, eps, 3)) / (2 * h)
        np.testing.assert_allclose(d4_fd, force_derivatives(w, eps, 4), rtol=1e-6)

    def test_bad_order(self):
        """Test unsupported derivative orders are rejected"""
        with pytest.raises(ValueError):
            force_derivatives(0.1, 0.1, 5)
        with pytest.raises(ValueError):
            g_log(0.1, order=3)


class TestLogFlux:
    """g(W) = (1+W) log(1+W) and v log v"""

    def test_g_values(self):
        """Test g(e − 1) = e and g′(0.5) = 1 + log 1.5"""
        assert g_log(math.e - 1.0) == pytest.approx(math.e, rel=1e-14)
        assert g_log(0.5, order=1) == pytest.approx(1.0 + math.log(1.5), rel=1e-14)
        assert g_log(1.0, order=2) == pytest.approx(0.5)

    def test_vlogv_at_gaussian_peak(self):
        """Test √e·log √e = √e/2"""
        assert vlogv(math.sqrt(math.e)) == pytest.approx(math.sqrt(math.e) / 2.0, rel=1e-14)

    def test_vlogv_continuous_at_zero(self):
        """Test v log v vanishes at 0 and at subnormal inputs"""
        assert vlogv(0.0) == 0.0
        assert vlogv(5e-324) == 0.0
        assert vlogv(np.array([0.0, 1.0])).tolist() == [0.0, 0.0]

    def test_vlogv_rejects_negative(self):
        """Test v log v is undefined for v < 0"""
        with pytest.raises(DomainError):
            vlogv(-1e-3)

    def test_vlogabsv_is_odd(self):
        """Test v log|v| extends oddly to negative v"""
        v = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
        out = vlogabsv(v)
        np.testing.assert_allclose(out, -out[::-1], atol=1e-15)


class TestDomain:
    """Arguments at or below −1"""

    @pytest.mark.parametrize("fn", [force, potential, n_epsilon, m_epsilon])
    def test_rejects_compressed_past_contact(self, fn):
        """Test w ≤ −1 raises DomainError"""
        with pytest.raises(DomainError):
            fn(-1.0, 0.1)
        with pytest.raises(DomainError):
            fn(np.array([0.0, -1.5]), 0.1)

    def test_g_rejects_minus_one(self):
        """Test g(−1) is outside the domain"""
        with pytest.raises(DomainError):
            g_log(-1.0)

    def test_nan_rejected(self):
        """Test NaN inputs do not slip through"""
        with pytest.raises(DomainError):
            force(np.array([0.0, np.nan]), 0.1)


class TestPowerFamily:
    """w + ε² w^p and the family dispatch"""

    def test_power_force_value(self):
        """Test power_force(2, 0.1, 3) = 2.08"""
        assert power_force(2.0, 0.1, 3) == pytest.approx(2.08, rel=1e-14)

    def test_power_potential_derivative(self):
        """Test the power potential integrates the power force"""
        h = 1e-5
        w = np.linspace(-2.0, 2.0, 21)
        fd = (power_potential(w + h, 0.2, 4) - power_potential(w - h, 0.2, 4)) / (2 * h)
        np.testing.assert_allclose(fd, power_force(w, 0.2, 4), rtol=1e-7, atol=1e-9)

    def test_power_derivatives(self):
        """Test second to fourth derivatives for p = 2 and p = 5"""
        assert power_force_derivatives(1.5, 0.1, 2, 2) == pytest.approx(1.0 + 0.01 * 2 * 1.5)
        assert power_force_derivatives(1.5, 0.1, 2, 4) == 0.0
        assert power_force_derivatives(2.0, 0.1, 5, 4) == pytest.approx(0.01 * 60 * 4.0)

    def test_power_flux(self):
        """Test W^p and its derivatives"""
        assert power_flux(3.0, 2) == pytest.approx(9.0)
        assert power_flux(3.0, 2, order=1) == pytest.approx(6.0)
        assert power_flux(3.0, 2, order=2) == pytest.approx(2.0)

    def test_dispatch(self):
        """Test the family switch selects the matching nonlinearity"""
        hertz = ModelParams(epsilon=0.1, lam=2.0)
        power = ModelParams(epsilon=0.1, lam=2.0, family=NonlinearityFamily.POWER, power_exponent=3)
        assert lattice_force(0.5, hertz) == pytest.approx(force(0.5, 0.1))
        assert lattice_force(0.5, power) == pytest.approx(0.5 + 0.01 * 0.125)
        assert nonlinear_remainder(0.5, power) == pytest.approx(0.01 * 0.125)
        assert kdv_flux(0.5, hertz) == pytest.approx(g_log(0.5))
        assert kdv_flux(0.5, power) == pytest.approx(0.125)
