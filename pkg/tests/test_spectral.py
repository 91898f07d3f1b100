"""
tests/test_spectral.py
──────────────────────
Tests for the periodic grids, Fourier multipliers, lattice sampling and norms.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from config.settings import grid_settings
from core.exceptions import ResolutionError
from core.models import Parity, VariableTag, WaveProfile
from utils.spectral import (
    band_evaluate, band_shift, cosine_basis, cosine_coefficients, default_x_grid, default_z_grid,
    discrete_laplacian, embed, hat_convolve, hat_symbol, inner_product, low_pass_split, make_grid, norms,
    nyquist_energy_fraction, profile_from_function, ring_grid, ring_sample, sample_to_lattice,
    spectral_derivative, symmetrize,
)


def _gaussian(grid):
    return profile_from_function(grid, lambda x: np.exp(-x ** 2))


def _mode(grid, m, fn=np.cos):
    k = math.pi * m / grid.half_width
    return k, profile_from_function(grid, lambda x: fn(k * x))


class TestGrids:
    """Grid construction"""

    def test_nodes_and_wavenumbers(self):
        """Test nodes start at −L and the Nyquist wavenumber is π/h"""
        grid = make_grid(64, 8.0)
        assert grid.spacing == pytest.approx(0.25)
        assert grid.nodes[0] == pytest.approx(-8.0)
        assert grid.nyquist == pytest.approx(4 * math.pi)
        assert abs(grid.wavenumbers[32]) == pytest.approx(grid.nyquist)

    def test_rejects_non_power_of_two(self):
        """Test grids need a power-of-two size"""
        with pytest.raises(ValueError):
            make_grid(100, 5.0)

    def test_ring_grid_layout(self):
        """Test a ring grid spans N sites with spacing scale/q"""
        q = grid_settings.oversampling
        grid = ring_grid(128, scale=0.1)
        assert grid.n_points == 128 * q
        assert grid.spacing == pytest.approx(0.1 / q)
        assert grid.half_width == pytest.approx(6.4)

    def test_default_z_grid_unit_shift_is_index_shift(self):
        """Test the z-grid spacing is exactly 1/q and covers the tails"""
        q = grid_settings.oversampling
        grid = default_z_grid(0.1, 2.0)
        assert grid.spacing == pytest.approx(1.0 / q)
        assert grid.half_width >= 40.0 / (0.1 * math.sqrt(12.0))

    def test_default_x_grid(self):
        """Test the x-grid half-width grows as λ → 1"""
        assert default_x_grid(3.0).half_width == pytest.approx(max(grid_settings.x_min_half_width,
                                                                    12.0 / math.sqrt(24.0)))
        assert default_x_grid(1.01).half_width == pytest.approx(12.0 / math.sqrt(0.12))

    def test_embed_pads_with_zeros(self):
        """Test embedding keeps values on the shared nodes"""
        small = _gaussian(make_grid(64, 8.0))
        wide = embed(small, make_grid(256, 32.0))
        assert wide.values[96:160] == pytest.approx(small.values)
        assert np.all(wide.values[:96] == 0.0)

    def test_embed_rejects_mismatched_spacing(self):
        """Test embedding needs identical spacing"""
        with pytest.raises(ResolutionError):
            embed(_gaussian(make_grid(64, 8.0)), make_grid(128, 32.0))


class TestMultipliers:
    """Fourier multipliers on single modes"""

    def test_derivative_of_mode(self):
        """Test d/dx sin(kx) = k cos(kx)"""
        grid = make_grid(128, 10.0)
        k, f = _mode(grid, 3, np.sin)
        df = spectral_derivative(f)
        np.testing.assert_allclose(df.values, k * np.cos(k * grid.nodes), atol=1e-12)
        d2 = spectral_derivative(f, order=2)
        np.testing.assert_allclose(d2.values, -k ** 2 * f.values, atol=1e-11)

    def test_derivative_order_validated(self):
        """Test order 0 is rejected"""
        with pytest.raises(ValueError):
            spectral_derivative(_gaussian(make_grid(64, 8.0)), order=0)

    def test_hat_symbol(self):
        """Test Λ̂(0) = 1, its Taylor branch and Λ̂(π) = 4/π²"""
        assert hat_symbol(0.0) == 1.0
        assert hat_symbol(1e-5) == pytest.approx(1.0 - 1e-10 / 12.0, rel=1e-15)
        assert hat_symbol(math.pi) == pytest.approx(4.0 / math.pi ** 2, rel=1e-14)
        assert hat_symbol(np.array([0.0, 2 * math.pi]))[1] == pytest.approx(0.0, abs=1e-30)

    def test_hat_convolve_mode(self):
        """Test Λ∗cos(kz) = Λ̂(k) cos(kz)"""
        grid = make_grid(256, 32.0)
        k, f = _mode(grid, 5)
        np.testing.assert_allclose(hat_convolve(f).values, hat_symbol(k) * f.values, atol=1e-13)

    def test_hat_convolve_gaussian(self):
        """Test Λ∗f against direct quadrature of the tent kernel"""
        grid = make_grid(512, 16.0)
        f = _gaussian(grid)
        y = np.linspace(-1.0, 1.0, 4001)
        weights = (1.0 - np.abs(y)) * (y[1] - y[0])
        direct = np.array([np.sum(weights * np.exp(-(z - y) ** 2)) for z in (0.0, 0.5, 1.25)])
        conv = hat_convolve(f)
        index = [256, 264, 276]
        np.testing.assert_allclose(conv.values[index], direct, rtol=1e-6)

    def test_hat_convolve_needs_fine_grid(self):
        """Test spacing above 1/2 is rejected"""
        with pytest.raises(ResolutionError):
            hat_convolve(_gaussian(make_grid(16, 8.0)))

    def test_band_shift_mode(self):
        """Test f(· + a) on a band-limited mode"""
        grid = make_grid(128, 10.0)
        k, f = _mode(grid, 4, np.sin)
        shifted = band_shift(f, 0.37)
        np.testing.assert_allclose(shifted.values, np.sin(k * (grid.nodes + 0.37)), atol=1e-12)
        assert band_shift(f, 0.0) is f

    def test_discrete_laplacian_mode(self):
        """Test Δcos(kz) = (2 cos k − 2) cos(kz)"""
        grid = make_grid(256, 32.0)
        k, f = _mode(grid, 7)
        np.testing.assert_allclose(discrete_laplacian(f).values, (2 * math.cos(k) - 2) * f.values, atol=1e-12)

    def test_low_pass_split_sums_back(self):
        """Test low + high reproduces f with disjoint spectra"""
        grid = make_grid(256, 16.0)
        f = _gaussian(grid)
        low, high = low_pass_split(f, 2.0)
        np.testing.assert_allclose(low.values + high.values, f.values, atol=1e-15)
        spectrum = np.abs(np.fft.fft(high.values))
        assert np.all(spectrum[np.abs(grid.wavenumbers) <= 2.0] < 1e-12)

    def test_low_pass_cutoff_validated(self):
        """Test the cutoff must lie below Nyquist"""
        with pytest.raises(ValueError):
            low_pass_split(_gaussian(make_grid(64, 8.0)), 100.0)

    def test_nyquist_fraction(self):
        """Test an alternating sequence lives entirely in the Nyquist mode"""
        assert nyquist_energy_fraction((-1.0) ** np.arange(32)) == pytest.approx(1.0)
        assert nyquist_energy_fraction(np.zeros(32)) == 0.0
        assert nyquist_energy_fraction(_gaussian(make_grid(256, 16.0)).values) < 1e-20


class TestSampling:
    """Off-grid evaluation and lattice sampling"""

    def test_band_evaluate_off_grid(self):
        """Test the interpolant reproduces a resolved Gaussian between nodes"""
        grid = make_grid(256, 16.0)
        points = np.array([-1.3, 0.01, 0.77, 2.5])
        np.testing.assert_allclose(band_evaluate(_gaussian(grid), points), np.exp(-points ** 2), atol=1e-12)

    def test_sample_to_lattice_strided(self):
        """Test ε an integer multiple of h samples by striding"""
        grid = make_grid(1024, 25.6)
        eps = 4 * grid.spacing
        n = np.arange(-20, 21)
        np.testing.assert_allclose(sample_to_lattice(_gaussian(grid), eps, n), np.exp(-(eps * n) ** 2), atol=1e-14)

    def test_sample_to_lattice_with_shift(self):
        """Test X(ε(n − t)) for a shift that is not a node offset"""
        grid = make_grid(1024, 25.6)
        n = np.arange(-30, 31)
        for eps in (4 * grid.spacing, 0.123):
            values = sample_to_lattice(_gaussian(grid), eps, n, shift=1.7)
            np.testing.assert_allclose(values, np.exp(-(eps * (n - 1.7)) ** 2), atol=1e-11)

    def test_ring_sample(self):
        """Test ring sites sit at scale·(i − N/2)"""
        n_sites = 64
        grid = ring_grid(n_sites, scale=0.5)
        profile = profile_from_function(grid, lambda x: np.exp(-x ** 2), VariableTag.XI_SCALE)
        positions = 0.5 * (np.arange(n_sites) - n_sites / 2)
        np.testing.assert_allclose(ring_sample(profile, n_sites), np.exp(-positions ** 2), atol=1e-15)
        np.testing.assert_allclose(ring_sample(profile, n_sites, shift=0.3), np.exp(-(positions - 0.3) ** 2),
                                   atol=1e-10)

    def test_ring_sample_rejects_other_grids(self):
        """Test a grid that is not a multiple of N is refused"""
        profile = _gaussian(make_grid(64, 8.0))
        with pytest.raises(ResolutionError):
            ring_sample(profile, 48)


class TestNormsAndBasis:
    """Discrete norms and the even cosine basis"""

    def test_gaussian_norms(self):
        """Test L2 and H1 norms of e^{−x²}"""
        f = _gaussian(make_grid(512, 16.0))
        assert norms(f, "L2") == pytest.approx(math.sqrt(math.sqrt(math.pi / 2)), rel=1e-12)
        assert norms(f, "H1") == pytest.approx(math.sqrt(2 * math.sqrt(math.pi / 2)), rel=1e-10)
        assert norms(f, "sup") == pytest.approx(1.0)
        assert inner_product(f, f) == pytest.approx(norms(f, "L2") ** 2)

    def test_sequence_norms(self):
        """Test bare sequences support l2 and sup only"""
        assert norms([3.0, -4.0], "l2") == pytest.approx(5.0)
        assert norms([3.0, -4.0], "sup") == pytest.approx(4.0)
        assert norms([], "l2") == 0.0
        with pytest.raises(ValueError):
            norms([1.0, 2.0], "L2")
        with pytest.raises(ValueError):
            norms(_gaussian(make_grid(64, 8.0)), "W3")

    def test_cosine_basis_orthogonal(self):
        """Test the columns are orthogonal with the advertised norms"""
        grid = make_grid(64, 8.0)
        modes = [0, 1, 5, 32]
        basis, sq_norms = cosine_basis(grid, modes)
        gram = basis.T @ basis
        np.testing.assert_allclose(gram, np.diag(sq_norms), atol=1e-10)
        coeffs = cosine_coefficients(basis[:, 2] * 3.0, basis, sq_norms)
        np.testing.assert_allclose(coeffs, [0.0, 0.0, 3.0, 0.0], atol=1e-12)

    def test_even_profile_symmetrized(self):
        """Test EVEN parity symmetrizes on construction"""
        grid = make_grid(64, 8.0)
        values = np.exp(-(grid.nodes - 0.1) ** 2)
        even = WaveProfile(grid, values, parity=Parity.EVEN)
        np.testing.assert_allclose(even.values, symmetrize(values))
        np.testing.assert_allclose(even.values[1:], even.values[1:][::-1], atol=1e-15)
