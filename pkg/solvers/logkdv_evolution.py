"""
solvers/logkdv_evolution.py
───────────────────────────
Pseudospectral integration of the KdV-type equations in the lattice frame

  2W_τ + W_ξξξ/12 + (f(W))_ξ = 0,   f ∈ { (1+W)log(1+W),  v log|v|,  W^p }

on a periodic ξ-grid. In Fourier space Ŵ_τ = L Ŵ + N(Ŵ) with
  L = ik³/24                        (exact through the integrating factor e^{Lτ})
  N = −(ik/2)·χ_{2/3}·F[f(W)]        (RK4, 2/3-rule dealiasing)

The k = 0 mode is untouched by both parts, so ∫W dξ is conserved to
round-off; ∫W² is conserved by the continuous flow and drifts only by the
time-stepping error.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from config.settings import grid_settings
from core.exceptions import DomainError, GuardViolationError
from core.models import Parity, PdeNonlinearity, SpectralGrid, VariableTag, WaveProfile
from core.nonlinearities import g_log, power_flux, vlogabsv
from utils.spectral import band_evaluate, derivative_values, make_grid

logger = logging.getLogger(__name__)

_NEGATIVE_TOLERANCE = 1e-8


# ─────────────────────────────────────
# 1. STATE
# ─────────────────────────────────────

@dataclass(frozen=True)
class PdeState:
    """W(·, τ) on a ξ-scale grid and the flux it evolves under."""
    profile: WaveProfile
    tau: float = 0.0
    nonlinearity: PdeNonlinearity = PdeNonlinearity.BACKGROUND_G
    power_exponent: int = 2

    def __post_init__(self):
        values = self.profile.values
        if not np.all(np.isfinite(values)):
            raise DomainError("PDE state contains non-finite values")
        if self.nonlinearity == PdeNonlinearity.BACKGROUND_G and np.min(values) <= -1.0:
            raise DomainError(f"background-g state needs W > -1 (min {np.min(values):.6g})")
        if self.nonlinearity == PdeNonlinearity.VLOGV:
            floor = -_NEGATIVE_TOLERANCE * max(float(np.max(np.abs(values))), 1.0)
            if np.min(values) < floor:
                raise DomainError(f"vlogv state needs v >= 0 (min {np.min(values):.6g})")

    @property
    def grid(self) -> SpectralGrid:
        return self.profile.grid

    def flux(self, values: np.ndarray) -> np.ndarray:
        return pde_flux(values, self.nonlinearity, self.power_exponent)


def pde_flux(values: np.ndarray, nonlinearity: PdeNonlinearity, power_exponent: int = 2,
             order: int = 0) -> np.ndarray:
    if nonlinearity == PdeNonlinearity.BACKGROUND_G:
        return g_log(values, order)
    if nonlinearity == PdeNonlinearity.POWER:
        return power_flux(values, power_exponent, order)
    if order != 0:
        raise ValueError("vlogv flux derivatives are not used")
    return vlogabsv(values)


def default_pde_grid(n_points: Optional[int] = None, half_width: Optional[float] = None) -> SpectralGrid:
    return make_grid(n_points or grid_settings.pde_points, half_width or grid_settings.pde_half_width)


def default_dtau(grid: SpectralGrid) -> float:
    """0.5·h³·24 capped at 1e−3."""
    return min(0.5 * grid.spacing ** 3 * 24.0, 1e-3)


def dealias_mask(grid: SpectralGrid) -> np.ndarray:
    return np.abs(grid.wavenumbers) <= (2.0 / 3.0) * grid.nyquist


def kdv_rhs(values: np.ndarray, grid: SpectralGrid, nonlinearity: PdeNonlinearity,
            power_exponent: int = 2) -> np.ndarray:
    """W_τ = −W_ξξξ/24 − (f(W))_ξ/2 in physical space (spectral derivatives)."""
    third = derivative_values(values, grid, 3)
    flux_slope = derivative_values(pde_flux(values, nonlinearity, power_exponent), grid, 1)
    return -third / 24.0 - 0.5 * flux_slope


# ─────────────────────────────────────
# 2. INTEGRATING-FACTOR RK4
# ─────────────────────────────────────

class IfRk4Stepper:
    """Precomputed factors for one (grid, dtau, flux) combination."""

    def __init__(self, grid: SpectralGrid, dtau: float, nonlinearity: PdeNonlinearity,
                 power_exponent: int = 2, include_flux: bool = True):
        k = grid.wavenumbers
        self.grid = grid
        self.dtau = dtau
        self.nonlinearity = nonlinearity
        self.power_exponent = power_exponent
        self.include_flux = include_flux
        self.half = np.exp(1j * k ** 3 / 24.0 * dtau / 2.0)
        self.full = self.half ** 2
        self.flux_symbol = -0.5j * k * dealias_mask(grid)

    def _nonlinear(self, spectrum: np.ndarray) -> np.ndarray:
        if not self.include_flux:
            return np.zeros_like(spectrum)
        values = np.real(np.fft.ifft(spectrum))
        return self.flux_symbol * np.fft.fft(pde_flux(values, self.nonlinearity, self.power_exponent))

    def step_spectrum(self, spectrum: np.ndarray) -> np.ndarray:
        dt = self.dtau
        e, e2 = self.half, self.full
        a = self._nonlinear(spectrum)
        b = self._nonlinear(e * (spectrum + 0.5 * dt * a))
        c = self._nonlinear(e * spectrum + 0.5 * dt * b)
        d = self._nonlinear(e2 * spectrum + dt * e * c)
        return e2 * spectrum + dt / 6.0 * (e2 * a + 2.0 * e * (b + c) + d)


def step_ifrk4(state: PdeState, dtau: float, include_flux: bool = True) -> PdeState:
    """One integrating-factor RK4 step (builds the factors; use evolve for long runs)."""
    stepper = IfRk4Stepper(state.grid, dtau, state.nonlinearity, state.power_exponent, include_flux)
    values = np.real(np.fft.ifft(stepper.step_spectrum(np.fft.fft(state.profile.values))))
    return _next_state(state, values, state.tau + dtau)


def _next_state(state: PdeState, values: np.ndarray, tau: float) -> PdeState:
    try:
        return PdeState(state.profile.with_values(values, Parity.NONE), tau, state.nonlinearity,
                        state.power_exponent)
    except DomainError as exc:
        raise GuardViolationError(f"PDE run left its domain at tau = {tau:.6g}: {exc}", snapshot=state) from exc


# ─────────────────────────────────────
# 3. DIAGNOSTICS
# ─────────────────────────────────────

def conserved_quantities(state: PdeState):
    """(∫W dξ, ∫W² dξ) by the trapezoid rule (spectrally exact on the periodic grid)."""
    h = state.grid.spacing
    values = state.profile.values
    return float(h * np.sum(values)), float(h * np.sum(values * values))


def locate_peak(profile: WaveProfile, newton_steps: int = 4) -> float:
    """Position of the maximum: 3-point quadratic fit, then Newton on the band-limited W′ = 0."""
    grid = profile.grid
    values = profile.values
    n = grid.n_points
    j = int(np.argmax(values))
    left, mid, right = values[(j - 1) % n], values[j], values[(j + 1) % n]
    curvature = left - 2.0 * mid + right
    offset = 0.0 if curvature == 0.0 else 0.5 * (left - right) / curvature
    x = grid.nodes[j] + offset * grid.spacing
    first = profile.with_values(derivative_values(values, grid, 1), Parity.NONE)
    second = profile.with_values(derivative_values(values, grid, 2), Parity.NONE)
    for _ in range(newton_steps):
        slope = float(band_evaluate(first, np.array([x]))[0])
        bend = float(band_evaluate(second, np.array([x]))[0])
        if bend >= 0.0:
            break
        x -= slope / bend
    # wrap into [−L, L)
    return float((x + grid.half_width) % (2.0 * grid.half_width) - grid.half_width)


def spectral_tail_fraction(values: np.ndarray, grid: SpectralGrid) -> float:
    """Energy above the 2/3 dealiasing cutoff over the total."""
    spectrum = np.abs(np.fft.fft(values)) ** 2
    total = float(spectrum.sum())
    return 0.0 if total == 0.0 else float(spectrum[~dealias_mask(grid)].sum() / total)


@dataclass(frozen=True)
class PdeCheckpoint:
    tau: float
    center: float
    mass: float
    l2: float
    min: float
    max: float
    tail_fraction: float

    def as_row(self) -> dict:
        return {"tau": self.tau, "center": self.center, "mass": self.mass, "l2": self.l2,
                "min": self.min, "max": self.max}


def checkpoint_of(state: PdeState) -> PdeCheckpoint:
    mass, l2 = conserved_quantities(state)
    values = state.profile.values
    return PdeCheckpoint(tau=state.tau, center=locate_peak(state.profile), mass=mass, l2=l2,
                         min=float(np.min(values)), max=float(np.max(values)),
                         tail_fraction=spectral_tail_fraction(values, state.grid))


# ─────────────────────────────────────
# 4. EVOLUTION
# ─────────────────────────────────────

@dataclass
class PdeRun:
    initial: PdeState
    final: PdeState
    checkpoints: List[PdeCheckpoint] = field(default_factory=list)
    snapshots: List[PdeState] = field(default_factory=list)
    dtau: float = 0.0

    def unwrapped_centers(self) -> np.ndarray:
        """Checkpoint centers with periodic jumps removed."""
        period = 2.0 * self.initial.grid.half_width
        centers = np.array([c.center for c in self.checkpoints])
        return np.unwrap(centers * (2.0 * np.pi / period)) * (period / (2.0 * np.pi))


def evolve(state: PdeState, tau_end: float, dtau: Optional[float] = None,
           checkpoint_every: Optional[float] = None, observers: Sequence[Callable[[PdeState], None]] = (),
           keep_snapshots: bool = False, include_flux: bool = True) -> PdeRun:
    """
    Advance to tau_end in round((tau_end − τ₀)/dtau) steps; checkpoints at every
    round(checkpoint_every/dtau)-th step and at the end.
    """
    dtau = dtau or default_dtau(state.grid)
    n_steps = max(int(round((tau_end - state.tau) / dtau)), 0)
    stride = max(int(round((checkpoint_every or max(tau_end - state.tau, dtau)) / dtau)), 1)
    stepper = IfRk4Stepper(state.grid, dtau, state.nonlinearity, state.power_exponent, include_flux)

    run = PdeRun(initial=state, final=state, dtau=dtau)
    run.checkpoints.append(checkpoint_of(state))
    if keep_snapshots:
        run.snapshots.append(state)
    for observer in observers:
        observer(state)

    spectrum = np.fft.fft(state.profile.values)
    current = state
    for step in range(1, n_steps + 1):
        try:
            spectrum = stepper.step_spectrum(spectrum)
        except DomainError as exc:
            raise GuardViolationError(f"PDE run left its domain near tau = {state.tau + step * dtau:.6g}: {exc}",
                                      snapshot=current) from exc
        if step % stride == 0 or step == n_steps:
            values = np.real(np.fft.ifft(spectrum))
            current = _next_state(current, values, state.tau + step * dtau)
            run.checkpoints.append(checkpoint_of(current))
            if keep_snapshots:
                run.snapshots.append(current)
            for observer in observers:
                observer(current)
    run.final = current
    if run.checkpoints:
        tail = max(c.tail_fraction for c in run.checkpoints)
        if tail > 1e-10:
            logger.warning(f"spectral tail above the 2/3 cutoff reached {tail:.2e} (regularity loss?)")
    logger.debug(f"evolved {n_steps} IFRK4 steps of dtau={dtau:g} to tau={run.final.tau:g}")
    return run


def initial_state(values: np.ndarray, grid: SpectralGrid, nonlinearity: PdeNonlinearity,
                  power_exponent: int = 2, parity: Parity = Parity.NONE) -> PdeState:
    return PdeState(WaveProfile(grid, values, VariableTag.XI_SCALE, parity), 0.0, nonlinearity, power_exponent)
