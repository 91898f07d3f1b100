"""
tests/test_justification_harness.py
───────────────────────────────────
Tests for the experiment functions behind the subcommands.

Tests cover:
  1. Shared helpers (pool map, ring sizing, tail decay)
  2. Stationary profiles and the trivial-solution check
  3. The sampling constant and the energy-type trace
  4. Log-KdV transport for the Gaussian family and W_stat
  5. Full acceptance runs (slow)
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from core.exceptions import ExperimentAborted
from core.models import Integrator, ModelParams, NonlinearityFamily, PdeNonlinearity, PerturbationKind
from experiments.justification_harness import (
    _parallel_map, energy_type_trace, ring_sites_for, run_pde, run_residual_scaling, run_sampling_check,
    run_simulation, run_small_solution_check, run_spectrum, run_stationary_checks, run_theorem1_sweep,
    run_theorem2_stability, run_theorem3_justification, run_travelling_wave, sampling_constant, tail_decay,
)

PARAMS = ModelParams(epsilon=0.1, lam=2.0)


def _failed(report):
    return [v.criterion for v in report.verdicts if not v.passed]


# ─────────────────────────────────────
# TEST 1: Shared helpers
# ─────────────────────────────────────

class TestHelpers:
    """Pool map and sizing rules"""

    def test_parallel_map_keeps_order(self):
        """Test serial and pooled maps agree and keep task order"""
        tasks = [9.0, 1.0, 4.0, 16.0]
        assert _parallel_map(math.sqrt, tasks) == [3.0, 1.0, 2.0, 4.0]
        assert _parallel_map(math.sqrt, tasks, workers=2) == [3.0, 1.0, 2.0, 4.0]
        assert _parallel_map(math.sqrt, []) == []

    def test_tail_decay(self):
        """Test κ for the Hertzian and power families"""
        assert tail_decay(PARAMS) == pytest.approx(math.sqrt(12.0))
        power = ModelParams(epsilon=0.1, lam=2.0, family=NonlinearityFamily.POWER)
        assert tail_decay(power) == pytest.approx(math.sqrt(24.0))

    def test_ring_sites(self):
        """Test ring sizes are powers of two covering the wave and the floor"""
        assert ring_sites_for(PARAMS) == 4096
        assert ring_sites_for(PARAMS, at_least_sites=5000) == 8192
        assert ring_sites_for(PARAMS, override=512) == 512
        slow_decay = ModelParams(epsilon=0.02, lam=1.01)
        assert ring_sites_for(slow_decay) >= 40.0 / (0.02 * math.sqrt(0.12))


# ─────────────────────────────────────
# TEST 2: Stationary profiles and small solutions
# ─────────────────────────────────────

class TestStationaryExperiments:
    """Quick experiments"""

    def test_stationary_checks(self):
        """Test the Gaussian identity and the W_stat residual and tail rate at λ = 2"""
        report = run_stationary_checks([2.0])
        assert _failed(report) == []
        assert len(report.curves["stationary"]) == 1
        assert "w_stat_lambda_2" in report.profiles

    def test_small_solution_check(self):
        """Test seeded data of size 0.5 contract to zero at λ = 3, ε = 0.2"""
        report = run_small_solution_check(trials=5, seed=3)
        assert report.all_passed
        assert report.sup_ratios["max_ratio"] <= report.sup_ratios["ratio_bound"] + 1e-12
        assert len(report.curves["small_solution"]) == 5


# ─────────────────────────────────────
# TEST 3: Sampling and energy-type traces
# ─────────────────────────────────────

class TestSampling:
    """‖x‖_{l²} ≤ Cε^{−1/2}‖X‖_{H¹}"""

    def test_gaussian_constant(self):
        """Test the Gaussian constant is ‖X‖_{L²}/‖X‖_{H¹} = 1/√2"""
        constant = sampling_constant(lambda x: np.exp(-x ** 2), 0.1)
        assert constant == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-10)

    def test_constant_flat_in_epsilon(self):
        """Test the constants stay within 5% over a decade of ε"""
        report = run_sampling_check([0.02, 0.063, 0.2])
        assert report.all_passed
        assert set(report.curves) == {"sampling_gaussian", "sampling_sech"}


class TestEnergyTypeTrace:
    """Lower bound and envelope of the energy-type functional"""

    def test_lower_bound_ratio(self):
        """Test ‖𝒫‖² + ‖𝒲‖² ≤ 4ℰ is measured as a ratio"""
        rows = [{"t": 0.0, "pert_sq": 2e-6, "energy_type": 1e-6, "q": 1e-3},
                {"t": 100.0, "pert_sq": 4e-6, "energy_type": 2e-6, "q": 1e-3}]
        trace = energy_type_trace(rows, 0.1)
        assert trace["lower_bound_ratio"] == pytest.approx(0.5)
        assert trace["envelope_constant"] == 0.0

    def test_zero_energy_with_perturbation(self):
        """Test a perturbation with no energy violates the bound"""
        rows = [{"t": 0.0, "pert_sq": 1e-6, "energy_type": 0.0, "q": 0.0}]
        assert energy_type_trace(rows, 0.1)["lower_bound_ratio"] == math.inf

    def test_envelope_grows_with_q(self):
        """Test a growing 𝒬 needs a positive envelope constant"""
        rows = [{"t": t, "pert_sq": 1.0, "energy_type": 1.0, "q": 1e-3 * (1.0 + 1e-3 * t)}
                for t in (0.0, 500.0, 1000.0)]
        assert energy_type_trace(rows, 0.1)["envelope_constant"] > 0.0


# ─────────────────────────────────────
# TEST 4: Log-KdV transport
# ─────────────────────────────────────

class TestPdeExperiment:
    """Short runs of the transport experiment"""

    def test_gaussian_family(self):
        """Test v_G stays put and the moving Gaussians travel at b"""
        report = run_pde(2.0, PdeNonlinearity.VLOGV, tau_end=0.2, dtau=5e-4, n_points=1024)
        assert _failed(report) == []
        assert "gaussian" in report.curves
        assert "gausson_b_0.1" in report.curves

    def test_w_stat_transport(self):
        """Test W_stat moves at λ/2 with shape and invariants kept"""
        report = run_pde(2.0, PdeNonlinearity.BACKGROUND_G, tau_end=0.2, dtau=5e-4, n_points=1024)
        assert _failed(report) == []
        assert report.sup_ratios["speed[w_stat]"] == pytest.approx(1.0, rel=0.005)


# ─────────────────────────────────────
# TEST 5: Acceptance runs
# ─────────────────────────────────────

@pytest.mark.slow
class TestAcceptance:
    """Minutes-long runs at the documented parameters"""

    def test_travelling_wave(self):
        """Test ε = 0.1, λ = 2 against the full Newton oracle"""
        assert _failed(run_travelling_wave(PARAMS)) == []

    def test_theorem1_sweep(self):
        """Test errors fall with ε and their scaled ratios stay bounded"""
        report = run_theorem1_sweep(2.0, (0.05, 0.1, 0.2))
        assert _failed(report) == []
        assert len(report.curves["theorem1"]) == 3

    def test_spectrum(self):
        """Test the eigenvalue counts and the truncation bound at λ = 2"""
        report = run_spectrum([2.0], trials=20)
        assert _failed(report) == []
        assert report.curves["spectrum"][0]["L_positive_in_gap"] >= 0.0

    def test_residual_scaling(self):
        """Test the residual slope lies in its window"""
        report = run_residual_scaling(PARAMS)
        assert _failed(report) == []
        assert 4.3 <= report.fitted_slopes["residual_total"] <= 5.5

    def test_simulation(self):
        """Test energy conservation and the energy split on a short run"""
        report = run_simulation(PARAMS, t_end=100.0, dt=0.05, integrator=Integrator.YOSHIDA4, delta=1e-3,
                                seed=42)
        assert _failed(report) == []

    def test_stability(self):
        """Test err(t) ≤ 10δ over τ₀ = 0.1 for every perturbation kind"""
        report = run_theorem2_stability(PARAMS, 1e-3, tau0=0.1, perturbation=PerturbationKind.GAUSSIAN, seed=42)
        assert _failed(report) == []
        assert "gaussian_half_delta" in report.curves

    def test_justification(self):
        """Test the ansatz stays within O(ε^{3/2}) over a short window"""
        try:
            report = run_theorem3_justification(PARAMS, epsilons=(0.1, 0.141), tau1=0.1, half_dt_rerun=False)
        except ExperimentAborted as exc:
            pytest.fail(f"justification aborted: {exc}")
        assert all(math.isfinite(v) for v in report.sup_ratios.values())
        assert not [c for c in _failed(report) if "initial_error" in c or "lower_bound" in c]
