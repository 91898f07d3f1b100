"""
tests/test_logkdv_evolution.py
──────────────────────────────
Tests for the pseudospectral KdV-type integrator.

Tests cover:
  1. State validation and the flux dispatcher
  2. Exact linear propagation and fourth-order convergence
  3. Conservation, peak tracking and the spectral tail
  4. W_stat transport at λ/2 and the stationary Gaussian
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.exceptions import DomainError
from core.metrics import linear_speed
from core.models import PdeNonlinearity, VariableTag
from solvers.logkdv_evolution import (
    PdeCheckpoint, PdeRun, conserved_quantities, default_dtau, evolve, initial_state, kdv_rhs,
    locate_peak, pde_flux, spectral_tail_fraction, step_ifrk4,
)
from solvers.logkdv_profiles import gaussian_profile, solve_stationary
from utils.spectral import band_shift, make_grid, profile_from_function

BG = PdeNonlinearity.BACKGROUND_G


def _bump_state(grid, amplitude=0.2, width=2.0, centre=0.0, nonlinearity=BG):
    values = amplitude * np.exp(-((grid.nodes - centre) / width) ** 2)
    return initial_state(values, grid, nonlinearity)


@pytest.fixture(scope="module")
def w_stat_run():
    grid = make_grid(1024, 20.0)
    W = solve_stationary(2.0).on_grid(grid, variable_tag=VariableTag.XI_SCALE)
    return evolve(initial_state(W.values, grid, BG), 1.0, 5e-4, checkpoint_every=0.05)


# ─────────────────────────────────────
# TEST 1: State and flux
# ─────────────────────────────────────

class TestState:
    """PdeState domain checks"""

    def test_background_needs_w_above_minus_one(self):
        """Test W ≤ −1 is rejected under the background flux"""
        grid = make_grid(64, 10.0)
        with pytest.raises(DomainError):
            initial_state(np.full(64, -1.0), grid, BG)

    def test_vlogv_needs_non_negative(self):
        """Test a clearly negative vlogv state is rejected and round-off is tolerated"""
        grid = make_grid(64, 10.0)
        with pytest.raises(DomainError):
            initial_state(np.full(64, -0.1), grid, PdeNonlinearity.VLOGV)
        values = np.zeros(64)
        values[3] = -1e-12
        assert initial_state(values, grid, PdeNonlinearity.VLOGV).tau == 0.0

    def test_rejects_non_finite(self):
        """Test NaN values are rejected"""
        values = np.zeros(64)
        values[0] = np.nan
        with pytest.raises(DomainError):
            initial_state(values, make_grid(64, 10.0), PdeNonlinearity.POWER)

    def test_flux_dispatch(self):
        """Test each nonlinearity selects its flux"""
        w = np.array([0.0, 0.5, 2.0])
        np.testing.assert_allclose(pde_flux(w, BG), (1 + w) * np.log1p(w))
        np.testing.assert_allclose(pde_flux(w, PdeNonlinearity.POWER, 3), w ** 3)
        np.testing.assert_allclose(pde_flux(w, PdeNonlinearity.VLOGV), [0.0, 0.5 * math.log(0.5), 2 * math.log(2)])
        with pytest.raises(ValueError):
            pde_flux(w, PdeNonlinearity.VLOGV, order=1)

    def test_default_dtau(self):
        """Test the step follows h³ on fine grids and is capped on coarse ones"""
        fine = make_grid(2048, 20.0)
        assert default_dtau(fine) == pytest.approx(12.0 * fine.spacing ** 3)
        assert default_dtau(make_grid(64, 20.0)) == 1e-3


# ─────────────────────────────────────
# TEST 2: Time stepping
# ─────────────────────────────────────

class TestStepping:
    """Integrating-factor RK4"""

    def test_zero_state_fixed(self):
        """Test W ≡ 0 stays zero"""
        grid = make_grid(128, 10.0)
        run = evolve(initial_state(np.zeros(128), grid, BG), 0.1, 0.01)
        assert np.max(np.abs(run.final.profile.values)) == 0.0

    def test_linear_plane_wave_exact(self):
        """Test the linear flow advances cos(kξ) by the exact phase k³τ/24"""
        grid = make_grid(256, 10.0)
        k = math.pi * 7 / grid.half_width
        state = initial_state(0.5 * np.cos(k * grid.nodes), grid, BG)
        tau = 1.0
        run = evolve(state, tau, 0.01, include_flux=False)
        exact = 0.5 * np.cos(k * grid.nodes + k ** 3 * tau / 24.0)
        assert np.max(np.abs(run.final.profile.values - exact)) <= 1e-12

    def test_step_matches_rhs(self):
        """Test a tiny step reproduces the physical-space right-hand side"""
        grid = make_grid(256, 20.0)
        state = _bump_state(grid)
        dtau = 1e-6
        stepped = step_ifrk4(state, dtau)
        rate = (stepped.profile.values - state.profile.values) / dtau
        expected = kdv_rhs(state.profile.values, grid, BG)
        assert np.max(np.abs(rate - expected)) <= 1e-4 * np.max(np.abs(expected))
        assert stepped.tau == pytest.approx(dtau)

    def test_fourth_order(self):
        """Test halving dtau divides the error by about 16"""
        grid = make_grid(256, 20.0)
        state = _bump_state(grid)
        reference = evolve(state, 1.0, 0.00625).final.profile.values
        coarse = np.max(np.abs(evolve(state, 1.0, 0.05).final.profile.values - reference))
        fine = np.max(np.abs(evolve(state, 1.0, 0.025).final.profile.values - reference))
        assert coarse / fine == pytest.approx(16.0, rel=0.2)

    def test_checkpoint_schedule(self):
        """Test checkpoints at every stride and at the end, observers included"""
        grid = make_grid(128, 10.0)
        seen = []
        run = evolve(_bump_state(grid), 0.1, 0.01, checkpoint_every=0.05, observers=[seen.append],
                     keep_snapshots=True)
        assert [c.tau for c in run.checkpoints] == pytest.approx([0.0, 0.05, 0.1])
        assert len(seen) == 3 and len(run.snapshots) == 3
        assert run.final.tau == pytest.approx(0.1)
        assert run.dtau == 0.01


# ─────────────────────────────────────
# TEST 3: Diagnostics
# ─────────────────────────────────────

class TestDiagnostics:
    """Invariants, peak position and spectral tail"""

    def test_mass_conserved(self):
        """Test ∫W is conserved to round-off and ∫W² to the stepping error"""
        grid = make_grid(256, 20.0)
        state = _bump_state(grid, amplitude=0.5)
        run = evolve(state, 1.0, 1e-3)
        mass0, l20 = conserved_quantities(state)
        mass1, l21 = conserved_quantities(run.final)
        assert abs(mass1 - mass0) <= 1e-12 * abs(mass0)
        assert abs(l21 - l20) <= 1e-8 * l20

    def test_locate_peak_off_grid(self):
        """Test the peak of a Gaussian between nodes is found to high accuracy"""
        grid = make_grid(256, 16.0)
        profile = profile_from_function(grid, lambda x: np.exp(-(x - 0.3) ** 2), VariableTag.XI_SCALE)
        assert locate_peak(profile) == pytest.approx(0.3, abs=1e-9)

    def test_spectral_tail_fraction(self):
        """Test the alternating mode sits entirely above the cutoff"""
        grid = make_grid(64, 10.0)
        assert spectral_tail_fraction((-1.0) ** np.arange(64), grid) == pytest.approx(1.0)
        assert spectral_tail_fraction(np.zeros(64), grid) == 0.0
        assert spectral_tail_fraction(np.exp(-grid.nodes ** 2), grid) < 1e-20

    def test_unwrapped_centers(self):
        """Test a centre crossing the periodic boundary is unwrapped"""
        grid = make_grid(64, 10.0)
        state = _bump_state(grid)
        checkpoints = [PdeCheckpoint(tau=t, center=c, mass=0.0, l2=0.0, min=0.0, max=0.0, tail_fraction=0.0)
                       for t, c in ((0.0, 9.5), (0.1, -9.7))]
        run = PdeRun(initial=state, final=state, checkpoints=checkpoints)
        np.testing.assert_allclose(run.unwrapped_centers(), [9.5, 10.3], atol=1e-12)


# ─────────────────────────────────────
# TEST 4: Stationary and travelling profiles
# ─────────────────────────────────────

class TestTransport:
    """W_stat at λ = 2 and the Gaussian standing wave"""

    def test_w_stat_speed(self, w_stat_run):
        """Test the peak moves at λ/2 within 0.5%"""
        times = [c.tau for c in w_stat_run.checkpoints]
        speed = linear_speed(times, w_stat_run.unwrapped_centers())
        assert speed == pytest.approx(1.0, rel=0.005)

    def test_w_stat_shape(self, w_stat_run):
        """Test the profile recentred by λτ/2 keeps its shape"""
        final = band_shift(w_stat_run.final.profile, 1.0 * w_stat_run.final.tau).values
        initial = w_stat_run.initial.profile.values
        assert np.linalg.norm(final - initial) / np.linalg.norm(initial) <= 1e-4

    def test_w_stat_invariants(self, w_stat_run):
        """Test mass and L² drift stay below their tolerances"""
        masses = [c.mass for c in w_stat_run.checkpoints]
        l2 = [c.l2 for c in w_stat_run.checkpoints]
        assert (max(masses) - min(masses)) / abs(masses[0]) <= 1e-10
        assert (max(l2) - min(l2)) / l2[0] <= 1e-8

    def test_gaussian_stationary(self):
        """Test v_G does not move under the vlogv flow"""
        grid = make_grid(1024, 20.0)
        gauss = gaussian_profile(grid)
        run = evolve(initial_state(gauss.values, grid, PdeNonlinearity.VLOGV), 1.0, 5e-4)
        assert np.max(np.abs(run.final.profile.values - gauss.values)) <= 1e-5
