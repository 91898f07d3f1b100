"""
solvers/logkdv_profiles.py
──────────────────────────
The stationary log-KdV solitary wave W_stat and the Gaussian standing wave.

  λW = W″/12 + g(W),   g(W) = (1+W) log(1+W),   λ > 1

has the first integral
  E = W′²/24 + ½(1+W)² log(1+W) − ¼(1+W)² − λW²/2 = −¼
along the homoclinic orbit. The turning point W₀ (= max W_stat) is the
positive root of E(W₀, 0) = −¼; the tails decay like e^{−κ_λ|x|},
κ_λ = √(12(λ−1)).

How the orbit is built:
  - W₀ by bracketing + bisection on the closed-form E
  - the orbit itself by DOP853 from the tail inward along the unstable
    manifold of the origin, (W, W′) = (a, κ_λ a) with a = tail threshold,
    stopping at W′ = 0; the peak must agree with W₀
  - mirrored for x > 0, exact linear tail a·e^{−κ_λ(|x| − x_cut)} beyond the cut
  - sampled on a spectral grid and polished by Newton–GMRES on that grid

Integrating outward from W₀ instead would amplify round-off like e^{κ_λ x}.

The power family λW = W″/12 + W^p has a closed form and skips the ODE.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect
from scipy.sparse.linalg import LinearOperator, gmres

from config.settings import solver_settings
from core.exceptions import BlowUpError, DomainError, NoRootError, NonConvergenceError
from core.models import ModelParams, NonlinearityFamily, Parity, SpectralGrid, VariableTag, WaveProfile
from core.nonlinearities import g_log, power_flux, vlogv
from utils.spectral import apply_symbol, default_x_grid, derivative_values, symmetrize

logger = logging.getLogger(__name__)

Flux = Callable[[np.ndarray, int], np.ndarray]

_SCAN_POINTS = 4000
_POLISH_STEPS = 6


# ─────────────────────────────────────
# RESULT TYPE
# ─────────────────────────────────────

@dataclass(frozen=True)
class StationaryWave:
    """W_stat on its grid, plus an evaluator for arbitrary x (ODE dense output or closed form)."""
    profile: WaveProfile
    lam: float
    turning_point: float
    decay_rate: float
    tail_threshold: float
    tail_prefactor: float
    residual: float
    diagnostics: Dict[str, float] = field(default_factory=dict)
    flux: Flux = field(default=g_log, repr=False)
    _evaluator: Callable[[np.ndarray], np.ndarray] = field(default=None, repr=False)
    _slope: Callable[[np.ndarray], np.ndarray] = field(default=None, repr=False)

    def evaluate(self, x) -> np.ndarray:
        return self._evaluator(np.asarray(x, dtype=float))

    def slope(self, x) -> np.ndarray:
        return self._slope(np.asarray(x, dtype=float))

    def on_grid(self, grid: SpectralGrid, scale: float = 1.0,
                variable_tag: VariableTag = VariableTag.X_SCALE, polish: bool = True) -> WaveProfile:
        """W_stat(scale·y) sampled at the nodes y of `grid` (scale = ε gives W_stat(ε·))."""
        values = self.evaluate(scale * grid.nodes)
        if polish:
            values = polish_stationary(values, grid, self.lam, scale=scale, flux=self.flux)
        return WaveProfile(grid, values, variable_tag, Parity.EVEN)


# ─────────────────────────────────────
# 1. FIRST INTEGRAL, TURNING POINT, DECAY RATE
# ─────────────────────────────────────

def energy_first_integral(W, Wp, lam: float):
    """E = W′²/24 + ½(1+W)² log(1+W) − ¼(1+W)² − λW²/2."""
    arr = np.asarray(W, dtype=float)
    if np.any(arr <= -1.0):
        raise DomainError("energy_first_integral: W must be > -1")
    one_plus = 1.0 + arr
    value = (np.asarray(Wp, dtype=float) ** 2 / 24.0 + 0.5 * one_plus ** 2 * np.log1p(arr)
             - 0.25 * one_plus ** 2 - 0.5 * lam * arr ** 2)
    return float(value) if np.ndim(value) == 0 else value


def decay_rate(lam: float) -> float:
    """κ_λ = √(12(λ − 1))."""
    if lam <= 1.0:
        raise DomainError(f"decay_rate needs lambda > 1, got {lam}")
    return math.sqrt(12.0 * (lam - 1.0))


def _turning_function(W, lam: float):
    return energy_first_integral(W, 0.0, lam) + 0.25


def count_sign_changes(values: np.ndarray) -> int:
    signs = np.sign(values[values != 0.0])
    return int(np.count_nonzero(np.diff(signs)))


def turning_point(lam: float) -> float:
    """Unique W₀ > 0 with E(W₀, 0) = −¼, bracketed on a log scan of (0, e^{2λ}]."""
    if lam <= 1.0:
        raise NoRootError(f"no solitary wave for lambda <= 1 (got {lam})")
    scan = np.logspace(-8.0, 2.0 * lam / math.log(10.0), _SCAN_POINTS)
    values = _turning_function(scan, lam)
    changes = count_sign_changes(values)
    if changes != 1:
        raise NoRootError(f"expected one sign change of E + 1/4 on (0, e^(2λ)], found {changes}")
    idx = int(np.nonzero(np.diff(np.sign(values)))[0][0])
    root = bisect(_turning_function, scan[idx], scan[idx + 1], args=(lam,),
                  xtol=1e-13, rtol=4.0 * np.finfo(float).eps, maxiter=400)
    logger.debug(f"turning point for lambda={lam}: W0={root:.15g}")
    return float(root)


# ─────────────────────────────────────
# 2. SPECTRAL POLISH
# ─────────────────────────────────────

def stationary_residual(values: np.ndarray, grid: SpectralGrid, lam: float,
                        scale: float = 1.0, flux: Flux = g_log) -> np.ndarray:
    """λW − W″/12 − flux(W), derivatives in the x = scale·y variable."""
    second = derivative_values(values, grid, 2) / scale ** 2
    return lam * values - second / 12.0 - flux(values, 0)


def polish_stationary(values: np.ndarray, grid: SpectralGrid, lam: float,
                      scale: float = 1.0, flux: Flux = g_log) -> np.ndarray:
    """
    Newton steps on λW − W″/12 − flux(W) = 0 in the even subspace.

    The Jacobian is L_λ = λ − ∂²/12 − flux′(W) (its kernel W′ is odd), each
    step solved by GMRES preconditioned with (λ − 1 + k²/12)⁻¹.
    """
    k2 = (grid.wavenumbers / scale) ** 2
    precond_symbol = 1.0 / (lam - 1.0 + k2 / 12.0)
    n = grid.n_points
    current = symmetrize(np.asarray(values, dtype=float))
    residual = stationary_residual(current, grid, lam, scale, flux)
    best = float(np.max(np.abs(residual)))
    for step in range(_POLISH_STEPS):
        if best <= 1e-13 * max(1.0, float(np.max(np.abs(current)))):
            break
        slope = flux(current, 1)
        jac = LinearOperator((n, n), dtype=float, matvec=lambda v, s=slope: (
            lam * v - apply_symbol(v, -k2) / 12.0 - s * v))
        precond = LinearOperator((n, n), dtype=float, matvec=lambda v: apply_symbol(v, precond_symbol))
        delta, info = gmres(jac, -residual, rtol=1e-13, atol=0.0, restart=solver_settings.gmres_restart,
                            maxiter=20, M=precond)
        candidate = symmetrize(current + delta)
        cand_residual = stationary_residual(candidate, grid, lam, scale, flux)
        cand_best = float(np.max(np.abs(cand_residual)))
        logger.debug(f"polish step {step}: residual {best:.3e} -> {cand_best:.3e} (gmres info {info})")
        if cand_best >= best:
            break
        current, residual, best = candidate, cand_residual, cand_best
    return current


# ─────────────────────────────────────
# 3. STATIONARY WAVE (HERTZIAN FAMILY)
# ─────────────────────────────────────

def solve_stationary(lam: float, grid: Optional[SpectralGrid] = None,
                     tail_threshold: Optional[float] = None, polish: bool = True) -> StationaryWave:
    """
    W_stat on an x-scale grid.

    Raises BlowUpError if the orbit leaves W < e^{2λ} or never turns,
    NonConvergenceError if the orbit peak misses W₀ by more than 1e−9 (relative)
    or the spectral residual exceeds its tolerance.
    """
    grid = grid or default_x_grid(lam)
    a = tail_threshold or solver_settings.tail_threshold
    kappa = decay_rate(lam)
    w_turn = turning_point(lam)
    ceiling = math.exp(2.0 * lam)

    def rhs(_, y):
        return [y[1], 12.0 * (lam * y[0] - g_log(y[0], 0))]

    def peak(_, y):
        return y[1]
    peak.terminal = True
    peak.direction = -1

    def escape(_, y):
        return y[0] - ceiling
    escape.terminal = True

    s_max = 4.0 * (math.log(ceiling / a) / kappa) + 10.0
    sol = solve_ivp(rhs, (0.0, s_max), [a, kappa * a], method="DOP853",
                    rtol=solver_settings.ode_rtol, atol=1e-30, events=(peak, escape),
                    dense_output=True)
    if sol.t_events[1].size:
        raise BlowUpError(f"orbit exceeded W = e^(2λ) = {ceiling:.4g}")
    if not sol.t_events[0].size:
        raise BlowUpError(f"orbit never turned before s = {s_max:.3g} ({sol.message})")

    s_cut = float(sol.t_events[0][0])
    w_peak = float(sol.y_events[0][0][0])
    mismatch = abs(w_peak - w_turn) / w_turn
    if mismatch > 1e-9:
        raise NonConvergenceError(f"orbit peak {w_peak:.15g} differs from turning point {w_turn:.15g} "
                                  f"(rel {mismatch:.2e})", residual=mismatch)
    dense = sol.sol

    def evaluator(x: np.ndarray) -> np.ndarray:
        s = s_cut - np.abs(x)
        out = a * np.exp(kappa * np.minimum(s, 0.0))
        inside = s >= 0.0
        if np.any(inside):
            out = np.where(inside, 0.0, out)
            out[inside] = dense(s[inside])[0]
        return out

    def slope(x: np.ndarray) -> np.ndarray:
        s = s_cut - np.abs(x)
        out = kappa * a * np.exp(kappa * np.minimum(s, 0.0))
        inside = s >= 0.0
        if np.any(inside):
            out = np.where(inside, 0.0, out)
            out[inside] = dense(s[inside])[1]
        return np.where(x > 0.0, -out, out)

    # energy along the orbit
    s_samples = np.linspace(0.0, s_cut, 2001)
    orbit = dense(s_samples)
    energy_drift = float(np.max(np.abs(energy_first_integral(orbit[0], orbit[1], lam) + 0.25)))

    raw = evaluator(grid.nodes)
    values = polish_stationary(raw, grid, lam) if polish else symmetrize(raw)
    residual = float(np.max(np.abs(stationary_residual(values, grid, lam))))
    raw_residual = float(np.max(np.abs(stationary_residual(symmetrize(raw), grid, lam))))
    if residual > solver_settings.stationary_residual_tol:
        raise NonConvergenceError(
            f"stationary residual {residual:.3e} exceeds {solver_settings.stationary_residual_tol:.1e}",
            residual=residual)

    tail_fit = fit_tail_rate(evaluator, 0.9 * s_cut, 0.99 * s_cut)
    diagnostics = {
        "peak_value": w_peak,
        "peak_mismatch": mismatch,
        "cut_position": s_cut,
        "energy_drift": energy_drift,
        "raw_residual": raw_residual,
        "fitted_tail_rate": tail_fit,
        "nfev": float(sol.nfev),
        "steps": float(sol.t.size - 1),
    }
    logger.info(f"W_stat(lambda={lam}): W0={w_turn:.10g}, residual={residual:.2e}, "
                f"|E+1/4|<={energy_drift:.1e}, tail rate {tail_fit:.6g} vs {kappa:.6g}")
    return StationaryWave(
        profile=WaveProfile(grid, values, VariableTag.X_SCALE, Parity.EVEN),
        lam=lam,
        turning_point=w_turn,
        decay_rate=kappa,
        tail_threshold=a,
        tail_prefactor=a * math.exp(kappa * s_cut),
        residual=residual,
        diagnostics=diagnostics,
        flux=g_log,
        _evaluator=evaluator,
        _slope=slope,
    )


def fit_tail_rate(evaluator: Callable[[np.ndarray], np.ndarray], x_start: float, x_end: float,
                  samples: int = 64) -> float:
    """Least-squares decay rate −d log W/dx on [x_start, x_end]."""
    x = np.linspace(x_start, x_end, samples)
    values = evaluator(x)
    slope_fit, _ = np.polyfit(x, np.log(values), 1)
    return float(-slope_fit)


# ─────────────────────────────────────
# 4. POWER FAMILY (closed form)
# ─────────────────────────────────────

def power_stationary(lam: float, p: int, grid: Optional[SpectralGrid] = None) -> StationaryWave:
    """W = [λ(p+1)/2]^{1/(p−1)} sech^{2/(p−1)}((p−1)√(3λ)·x) solves λW = W″/12 + W^p."""
    if lam <= 0.0 or p < 2:
        raise DomainError("power_stationary needs lambda > 0 and p >= 2")
    grid = grid or default_x_grid(lam + 1.0)
    amplitude = (0.5 * lam * (p + 1)) ** (1.0 / (p - 1))
    beta = (p - 1) * math.sqrt(3.0 * lam)
    exponent = 2.0 / (p - 1)

    def evaluator(x: np.ndarray) -> np.ndarray:
        return amplitude / np.cosh(beta * x) ** exponent

    def slope(x: np.ndarray) -> np.ndarray:
        return -amplitude * exponent * beta * np.tanh(beta * x) / np.cosh(beta * x) ** exponent

    def flux(values, order):
        return power_flux(values, p, order)

    values = evaluator(grid.nodes)
    residual = float(np.max(np.abs(stationary_residual(values, grid, lam, flux=flux))))
    kappa = math.sqrt(12.0 * lam)
    return StationaryWave(
        profile=WaveProfile(grid, values, VariableTag.X_SCALE, Parity.EVEN),
        lam=lam,
        turning_point=amplitude,
        decay_rate=kappa,
        tail_threshold=0.0,
        tail_prefactor=amplitude * 2.0 ** exponent,
        residual=residual,
        diagnostics={"power_exponent": float(p)},
        flux=flux,
        _evaluator=evaluator,
        _slope=slope,
    )


# ─────────────────────────────────────
# 5. GAUSSIAN STANDING WAVE (zero background)
# ─────────────────────────────────────

def gaussian_profile(grid: SpectralGrid, b: float = 0.0, a: float = 0.0) -> WaveProfile:
    """e^{2b}·v_G(x − a) with v_G(x) = √e·e^{−3x²}; b = a = 0 is the standing wave."""
    values = math.exp(2.0 * b) * math.sqrt(math.e) * np.exp(-3.0 * (grid.nodes - a) ** 2)
    parity = Parity.EVEN if a == 0.0 else Parity.NONE
    return WaveProfile(grid, values, VariableTag.X_SCALE, parity)


def gausson_residual(profile: WaveProfile, b: float = 0.0) -> np.ndarray:
    """v″/12 + v log v − 2b·v, identically zero for e^{2b}v_G(x − a)."""
    values = np.clip(profile.values, 0.0, None)
    return derivative_values(profile.values, profile.grid, 2) / 12.0 + vlogv(values) - 2.0 * b * profile.values


def stationary_for(params: ModelParams, grid: Optional[SpectralGrid] = None) -> StationaryWave:
    """The KdV-limit wave of a lattice model: W_stat for hertz-log, the closed form for power."""
    if params.family == NonlinearityFamily.POWER:
        return power_stationary(params.lam, params.power_exponent, grid)
    return solve_stationary(params.lam, grid)
