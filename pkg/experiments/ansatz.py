"""
experiments/ansatz.py
─────────────────────
The momentum ansatz P_ε built from a log-KdV profile W(ξ, τ) and the two
lattice residuals left when (W, P_ε) is sampled at ξ = ε(n − t), τ = ε³t.

  P_ε = P⁽⁰⁾ + εP⁽¹⁾ + ε²P⁽²⁾ + ε³P⁽³⁾
  P⁽⁰⁾ = −W
  P⁽¹⁾ = ½W_ξ
  P⁽²⁾ = −⅛W_ξξ − ½f(W)
  P⁽³⁾ = (1/48)W_ξξξ + ¼(f(W))_ξ

with f = g for the Hertzian family and f = W^p for the power family.

  Res⁽¹⁾ = P_ε(ξ+ε) − P_ε(ξ) + εW_ξ − ε³W_τ
  Res⁽²⁾ = εP_ξ − ε³P_τ + W(ξ) − W(ξ−ε) + ε²(f(W(ξ)) − f(W(ξ−ε)))

Profiles live on a ξ-ring grid (spacing ε/q) so ±ε shifts are index rolls
and lattice sampling is a band-limited shift followed by striding.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config.settings import grid_settings, solver_settings
from core.exceptions import ResolutionError
from core.models import Parity, PdeNonlinearity, SpectralGrid, VariableTag, WaveProfile
from solvers.logkdv_evolution import kdv_rhs, pde_flux
from utils.spectral import derivative_values, nyquist_energy_fraction, ring_grid, ring_sample

logger = logging.getLogger(__name__)

_MIN_RESIDUAL_HALF_WIDTH = 24.0


# ─────────────────────────────────────
# 1. THE ANSATZ
# ─────────────────────────────────────

@dataclass(frozen=True)
class AnsatzPair:
    """W and P_ε on the same ξ-grid, with the four orders of P_ε kept separately."""
    W: WaveProfile
    P: WaveProfile
    epsilon: float
    nonlinearity: PdeNonlinearity = PdeNonlinearity.BACKGROUND_G
    power_exponent: int = 2
    terms: Tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def grid(self) -> SpectralGrid:
        return self.W.grid

    def flux(self, values: np.ndarray, order: int = 0) -> np.ndarray:
        return pde_flux(values, self.nonlinearity, self.power_exponent, order)


def ansatz_terms(W: WaveProfile, nonlinearity: PdeNonlinearity = PdeNonlinearity.BACKGROUND_G,
                 power_exponent: int = 2) -> List[np.ndarray]:
    """[P⁽⁰⁾, P⁽¹⁾, P⁽²⁾, P⁽³⁾] on W's grid."""
    grid = W.grid
    w = W.values
    f = pde_flux(w, nonlinearity, power_exponent)
    return [
        -w,
        0.5 * derivative_values(w, grid, 1),
        -derivative_values(w, grid, 2) / 8.0 - 0.5 * f,
        derivative_values(w, grid, 3) / 48.0 + 0.25 * derivative_values(f, grid, 1),
    ]


def _check_resolved(W: WaveProfile) -> None:
    third = derivative_values(W.values, W.grid, 3)
    fraction = nyquist_energy_fraction(third)
    if fraction > solver_settings.nyquist_energy_warn:
        raise ResolutionError(f"W_ξξξ carries a Nyquist energy fraction {fraction:.2e} on "
                              f"{W.grid.n_points} points; refine the ξ-grid")


def build_ansatz(W: WaveProfile, epsilon: float,
                 nonlinearity: PdeNonlinearity = PdeNonlinearity.BACKGROUND_G,
                 power_exponent: int = 2) -> AnsatzPair:
    """P_ε = −W + (ε/2)W_ξ − (ε²/8)W_ξξ − (ε²/2)f(W) + (ε³/48)W_ξξξ + (ε³/4)(f(W))_ξ."""
    _check_resolved(W)
    terms = ansatz_terms(W, nonlinearity, power_exponent)
    values = terms[0] + epsilon * terms[1] + epsilon ** 2 * terms[2] + epsilon ** 3 * terms[3]
    parity = W.parity if epsilon == 0.0 else Parity.NONE
    P = WaveProfile(W.grid, values, VariableTag.XI_SCALE, parity)
    return AnsatzPair(W=W, P=P, epsilon=epsilon, nonlinearity=nonlinearity,
                      power_exponent=power_exponent, terms=tuple(terms))


def ansatz_rate(pair: AnsatzPair, w_tau: np.ndarray) -> np.ndarray:
    """∂_τ P_ε by the chain rule, given W_τ on the same grid."""
    grid = pair.grid
    eps = pair.epsilon
    flux_rate = pair.flux(pair.W.values, 1) * w_tau
    return (-w_tau
            + 0.5 * eps * derivative_values(w_tau, grid, 1)
            - eps ** 2 * (derivative_values(w_tau, grid, 2) / 8.0 + 0.5 * flux_rate)
            + eps ** 3 * (derivative_values(w_tau, grid, 3) / 48.0 + 0.25 * derivative_values(flux_rate, grid, 1)))


# ─────────────────────────────────────
# 2. RESIDUALS
# ─────────────────────────────────────

def shift_steps(grid: SpectralGrid, epsilon: float) -> int:
    """Number of grid nodes in one lattice step ε; the grid must resolve it exactly."""
    ratio = epsilon / grid.spacing
    q = int(round(ratio))
    if q < 1 or abs(ratio - q) > 1e-9:
        raise ResolutionError(f"ε = {epsilon} is not an integer multiple of the grid spacing {grid.spacing:.6g}")
    return q


def residual_profiles(pair: AnsatzPair, w_tau: Optional[np.ndarray] = None) -> Tuple[WaveProfile, WaveProfile]:
    """
    (Res⁽¹⁾, Res⁽²⁾) as functions of ξ at the time slice of `pair`.

    W_τ defaults to the log-KdV right-hand side evaluated on W.
    """
    grid = pair.grid
    eps = pair.epsilon
    q = shift_steps(grid, eps)
    w = pair.W.values
    p = pair.P.values
    if w_tau is None:
        w_tau = kdv_rhs(w, grid, pair.nonlinearity, pair.power_exponent)
    p_tau = ansatz_rate(pair, w_tau)
    f = pair.flux(w)

    res1 = (np.roll(p, -q) - p) + eps * derivative_values(w, grid, 1) - eps ** 3 * w_tau
    res2 = (eps * derivative_values(p, grid, 1) - eps ** 3 * p_tau
            + (w - np.roll(w, q)) + eps ** 2 * (f - np.roll(f, q)))
    return (WaveProfile(grid, res1, VariableTag.XI_SCALE, Parity.NONE),
            WaveProfile(grid, res2, VariableTag.XI_SCALE, Parity.NONE))


def residuals(pair: AnsatzPair, n_sites: int, t: float = 0.0, w_tau: Optional[np.ndarray] = None,
              drift: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Res⁽¹⁾_n, Res⁽²⁾_n on an n_sites ring at lattice time t.

    `pair` is the slice at τ = ε³t; `drift` is an extra ξ-translation of the
    slice (λτ/2 when the slice is W_stat itself rather than W(·, τ)).
    """
    res1, res2 = residual_profiles(pair, w_tau)
    shift = pair.epsilon * t + drift
    return ring_sample(res1, n_sites, shift), ring_sample(res2, n_sites, shift)


def residual_norm(pair: AnsatzPair, n_sites: int, t: float = 0.0, w_tau: Optional[np.ndarray] = None,
                  drift: float = 0.0) -> float:
    """‖Res⁽¹⁾‖_{l²} + ‖Res⁽²⁾‖_{l²}."""
    res1, res2 = residuals(pair, n_sites, t, w_tau, drift)
    return float(np.linalg.norm(res1) + np.linalg.norm(res2))


def residual_ring(epsilon: float, min_half_width: float = _MIN_RESIDUAL_HALF_WIDTH) -> Tuple[SpectralGrid, int]:
    """ξ-ring grid with εN/2 ≥ min_half_width sites' worth of room; returns (grid, N)."""
    n_sites = 16
    while 0.5 * epsilon * n_sites < min_half_width:
        n_sites *= 2
    return ring_grid(n_sites, scale=epsilon, oversampling=grid_settings.oversampling), n_sites
