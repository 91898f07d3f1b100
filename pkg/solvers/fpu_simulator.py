"""
solvers/fpu_simulator.py
────────────────────────
The FPU lattice in strain/momentum form on a ring of N sites:

  ẇ_n = p_{n+1} − p_n,        ṗ_n = Ṽ′(w_n) − Ṽ′(w_{n−1})       (indices mod N)

with the conserved energy H = ½Σp² + ΣṼ(w), and the decomposition of H
around a travelling wave (w_stat, p_stat)(n − ct):

  H₀ = Σ ½p_stat² + Ṽ(w_stat)
  H₁ = Σ p_stat 𝒫 + Ṽ′(w_stat) 𝒲
  H₂ = Σ ½𝒫² + ½Ṽ″(w_stat) 𝒲²
  H_R = H − H₀ − H₁ − H₂

Integrators:
  strang   : half w-flow, full p-flow, half w-flow (each sub-flow exact)
  yoshida4 : triple-jump composition of three Strang steps (4th order)
  rk4      : classical Runge-Kutta, kept as an oracle

The guard w_n > ball_r applies to the Hertzian family; crossing it raises
GuardViolationError carrying the last valid state.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.exceptions import GuardViolationError
from core.models import EnergySplit, Integrator, LatticeState, ModelParams, NonlinearityFamily, WaveProfile
from core.nonlinearities import lattice_force, lattice_force_derivative, lattice_potential
from utils.spectral import derivative_values, embed, ring_grid, ring_sample

logger = logging.getLogger(__name__)

_CBRT2 = 2.0 ** (1.0 / 3.0)
_YOSHIDA_OUTER = 1.0 / (2.0 - _CBRT2)
_YOSHIDA_INNER = -_CBRT2 / (2.0 - _CBRT2)

Observer = Callable[[LatticeState], None]


# ─────────────────────────────────────
# 1. VECTOR FIELD AND STEPPERS
# ─────────────────────────────────────

def _guard(w: np.ndarray, params: ModelParams, snapshot: LatticeState) -> None:
    if params.family == NonlinearityFamily.HERTZ_LOG:
        lowest = float(np.min(w))
        if lowest <= params.ball_r or math.isnan(lowest):
            raise GuardViolationError(
                f"strain reached {lowest:.6g} <= {params.ball_r} near t = {snapshot.t:.6g}", snapshot=snapshot)


def _strain_rate(p: np.ndarray) -> np.ndarray:
    return np.roll(p, -1) - p


def _momentum_rate(w: np.ndarray, params: ModelParams) -> np.ndarray:
    f = lattice_force(w, params)
    return f - np.roll(f, 1)


def rhs(state: LatticeState, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """(dw, dp) = ((S⁺ − I)p, (I − S⁻)Ṽ′(w))."""
    _guard(state.w, params, state)
    return _strain_rate(state.p), _momentum_rate(state.w, params)


def step_strang(state: LatticeState, dt: float, params: ModelParams) -> LatticeState:
    w = state.w + 0.5 * dt * _strain_rate(state.p)
    _guard(w, params, state)
    p = state.p + dt * _momentum_rate(w, params)
    w = w + 0.5 * dt * _strain_rate(p)
    _guard(w, params, state)
    return LatticeState(w, p, state.t + dt)


def step_yoshida4(state: LatticeState, dt: float, params: ModelParams) -> LatticeState:
    """Strang(w₁dt) ∘ Strang(w₀dt) ∘ Strang(w₁dt), w₁ = 1/(2 − 2^{1/3}), w₀ = 1 − 2w₁."""
    out = step_strang(state, _YOSHIDA_OUTER * dt, params)
    out = step_strang(out, _YOSHIDA_INNER * dt, params)
    out = step_strang(out, _YOSHIDA_OUTER * dt, params)
    return LatticeState(out.w, out.p, state.t + dt)


def step_rk4(state: LatticeState, dt: float, params: ModelParams) -> LatticeState:
    def field_at(w, p):
        _guard(w, params, state)
        return _strain_rate(p), _momentum_rate(w, params)

    k1w, k1p = field_at(state.w, state.p)
    k2w, k2p = field_at(state.w + 0.5 * dt * k1w, state.p + 0.5 * dt * k1p)
    k3w, k3p = field_at(state.w + 0.5 * dt * k2w, state.p + 0.5 * dt * k2p)
    k4w, k4p = field_at(state.w + dt * k3w, state.p + dt * k3p)
    w = state.w + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
    p = state.p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    _guard(w, params, state)
    return LatticeState(w, p, state.t + dt)


STEPPERS: Dict[Integrator, Callable[[LatticeState, float, ModelParams], LatticeState]] = {
    Integrator.STRANG: step_strang,
    Integrator.YOSHIDA4: step_yoshida4,
    Integrator.RK4: step_rk4,
}


# ─────────────────────────────────────
# 2. TIME INTEGRATION
# ─────────────────────────────────────

@dataclass
class Trajectory:
    """Checkpointed states of one integration (first entry is the initial state)."""
    checkpoints: List[LatticeState] = field(default_factory=list)
    dt: float = 0.0
    integrator: Integrator = Integrator.STRANG

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.checkpoints])

    @property
    def final(self) -> LatticeState:
        return self.checkpoints[-1]


def integrate(state: LatticeState, params: ModelParams, t_end: float, dt: float,
              integrator: Integrator = Integrator.STRANG, checkpoint_every: Optional[float] = None,
              observer: Optional[Observer] = None) -> Trajectory:
    """
    Advance to t_end in round(t_end/dt) steps, recording every round(checkpoint_every/dt)-th state.

    The observer receives each checkpoint (immutable) as it is produced.
    """
    stepper = STEPPERS[integrator]
    n_steps = max(int(round((t_end - state.t) / dt)), 0)
    stride = max(int(round((checkpoint_every or dt) / dt)), 1)
    trajectory = Trajectory([state], dt, integrator)
    if observer:
        observer(state)
    current = state
    for step in range(1, n_steps + 1):
        current = stepper(current, dt, params)
        # pin the clock to the step count to keep checkpoint times exact
        current = LatticeState(current.w, current.p, state.t + step * dt)
        if step % stride == 0 or step == n_steps:
            trajectory.checkpoints.append(current)
            if observer:
                observer(current)
    logger.debug(f"integrated {n_steps} {integrator.value} steps of dt={dt} on {state.n_sites} sites")
    return trajectory


# ─────────────────────────────────────
# 3. ENERGY AND ITS SPLIT AROUND A TRAVELLING WAVE
# ─────────────────────────────────────

def energy(state: LatticeState, params: ModelParams) -> float:
    """H = ½Σp² + ΣṼ(w)."""
    return float(0.5 * np.sum(state.p ** 2) + np.sum(lattice_potential(state.w, params)))


class ReferenceWave:
    """
    A travelling wave carried on an N-site ring: site i sits at z = i − N/2 at t = 0,
    so the reference at time t is (w_stat, p_stat)(i − N/2 − ct).
    """

    def __init__(self, strain: WaveProfile, momentum: WaveProfile, speed: float, n_sites: int):
        grid = ring_grid(n_sites)
        self.n_sites = n_sites
        self.speed = speed
        self.strain = embed(strain, grid) if strain.grid != grid else strain
        self.momentum = embed(momentum, grid) if momentum.grid != grid else momentum
        self.strain_slope = self.strain.with_values(derivative_values(self.strain.values, grid, 1))
        self.momentum_slope = self.momentum.with_values(derivative_values(self.momentum.values, grid, 1))

    def at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        shift = self.speed * t
        return ring_sample(self.strain, self.n_sites, shift), ring_sample(self.momentum, self.n_sites, shift)

    def slopes_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """(w′_stat, p′_stat)(n − ct)."""
        shift = self.speed * t
        return (ring_sample(self.strain_slope, self.n_sites, shift),
                ring_sample(self.momentum_slope, self.n_sites, shift))

    def state_at(self, t: float) -> LatticeState:
        w, p = self.at(t)
        return LatticeState(w, p, t)

    def l2_error(self, state: LatticeState) -> float:
        """‖w − w_stat‖_{l²} + ‖p − p_stat‖_{l²} at the state's time."""
        w, p = self.at(state.t)
        return float(np.linalg.norm(state.w - w) + np.linalg.norm(state.p - p))


def energy_split(state: LatticeState, reference: ReferenceWave, params: ModelParams) -> EnergySplit:
    w_ref, p_ref = reference.at(state.t)
    dw = state.w - w_ref
    dp = state.p - p_ref
    h0 = float(0.5 * np.sum(p_ref ** 2) + np.sum(lattice_potential(w_ref, params)))
    h1 = float(np.sum(p_ref * dp) + np.sum(lattice_force(w_ref, params) * dw))
    h2 = float(0.5 * np.sum(dp ** 2) + 0.5 * np.sum(lattice_force_derivative(w_ref, params, 2) * dw ** 2))
    hr = energy(state, params) - h0 - h1 - h2
    return EnergySplit(h0, h1, h2, hr, w_norm=float(np.linalg.norm(dw)), p_norm=float(np.linalg.norm(dp)))


def h1_rate(state: LatticeState, reference: ReferenceWave, params: ModelParams) -> Tuple[float, float]:
    """
    (dH₁/dt exact from the vector field, leading term (c/2)Σ w′_stat Ṽ‴(w_stat) 𝒲²).

    The difference of the two is the remainder S_R.
    """
    c = reference.speed
    w_ref, p_ref = reference.at(state.t)
    w_slope, p_slope = reference.slopes_at(state.t)
    dw = state.w - w_ref
    dp = state.p - p_ref
    w_ref_rate = -c * w_slope
    p_ref_rate = -c * p_slope
    dw_rate = _strain_rate(state.p) - w_ref_rate
    dp_rate = _momentum_rate(state.w, params) - p_ref_rate
    rate = (np.sum(p_ref_rate * dp + p_ref * dp_rate)
            + np.sum(lattice_force_derivative(w_ref, params, 2) * w_ref_rate * dw
                     + lattice_force(w_ref, params) * dw_rate))
    leading = 0.5 * c * np.sum(w_slope * lattice_force_derivative(w_ref, params, 3) * dw ** 2)
    return float(rate), float(leading)


@dataclass
class H1Balance:
    times: np.ndarray
    rate: np.ndarray                 # exact dH₁/dt
    leading: np.ndarray              # (c/2)Σ w′ Ṽ‴ 𝒲²
    remainder: np.ndarray            # S_R = rate − leading
    finite_difference: np.ndarray    # 4th-order difference of H₁ (NaN at the two ends)
    h1: np.ndarray
    w_norm: np.ndarray

    @property
    def fd_mismatch(self) -> float:
        ok = ~np.isnan(self.finite_difference)
        if not ok.any():
            return 0.0
        return float(np.max(np.abs(self.finite_difference[ok] - self.rate[ok])))


def h1_balance_check(trajectory: Trajectory, reference: ReferenceWave, params: ModelParams) -> H1Balance:
    states = trajectory.checkpoints
    times = np.array([s.t for s in states])
    pairs = [h1_rate(s, reference, params) for s in states]
    rate = np.array([r for r, _ in pairs])
    leading = np.array([l for _, l in pairs])
    splits = [energy_split(s, reference, params) for s in states]
    h1 = np.array([s.h1 for s in splits])
    fd = np.full(times.size, np.nan)
    if times.size >= 5:
        h = float(np.median(np.diff(times)))
        if h > 0.1:
            logger.warning(f"checkpoint spacing {h:g} > 0.1; finite-difference dH1/dt will be coarse")
        fd[2:-2] = (-h1[4:] + 8.0 * h1[3:-1] - 8.0 * h1[1:-3] + h1[:-4]) / (12.0 * h)
    return H1Balance(times, rate, leading, rate - leading, fd, h1, np.array([s.w_norm for s in splits]))


# ─────────────────────────────────────
# 4. PHYSICAL VARIABLES
# ─────────────────────────────────────

def to_physical(state: LatticeState, params: ModelParams) -> Tuple[np.ndarray, Dict[str, float]]:
    """u_n = −v₀(1 + w_n); the lattice time t′ relates to physical time by t′ = v₀^{ε²/2}·t."""
    time_scale = params.v0 ** (0.5 * params.epsilon ** 2)
    u = -params.v0 * (1.0 + state.w)
    return u, {"time_scale": time_scale, "t_physical": state.t / time_scale, "v0": params.v0}


def from_physical(u: np.ndarray, params: ModelParams) -> np.ndarray:
    return -np.asarray(u, dtype=float) / params.v0 - 1.0
