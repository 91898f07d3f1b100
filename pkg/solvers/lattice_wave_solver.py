"""
solvers/lattice_wave_solver.py
──────────────────────────────
The lattice travelling wave w_stat,ε(z), z = n − ct, c² = 1 + ε²λ.

The advance-delay equation (1+μ)w″ = Δ Ṽ_ε′(w) integrates twice to the
fixed-point form
  w = c⁻² Λ∗Ṽ_ε′(w)      ⇔      (1 + μ − Λ̂) ŵ = Λ̂ · F[N_ε(w)]

Two-scale solve (primary path):
  - split Fourier space at |k| = ε^p into low modes I and high modes J
  - inner problem on J for fixed low part u:
      v̂ = χ_J Λ̂/(1+μ−Λ̂) F[N_ε(u + v)]
    solved by a chord iteration (dense LU of the even-mode J block frozen at
    the incoming iterate, refreshed when progress stalls); the plain map
    v ↦ χ_J c⁻²Λ̂(v + F[N(u + v)]) must contract at the result (rate < 1)
  - outer problem on I: Newton on G(u) = u − χ_I Λ̂/(1+μ−Λ̂) F[N_ε(u + v(u))]
    with the Schur complement of the even-mode block, started at W_app
    (the low-pass part of W_stat(ε·)), damped by step halving

Oracle path: damped Newton–GMRES on the full grid, independent of the split.

Even functions are handled full-length and symmetrized after every
nonlinear step; dense blocks use the cosine basis of utils/spectral.py.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, eigsh, gmres

from config.settings import solver_settings
from core.exceptions import (
    BallViolationError, NonContractionError, NonConvergenceError, SingularJacobianError,
)
from core.models import ModelParams, NonlinearityFamily, Parity, SpectralGrid, VariableTag, WaveProfile
from core.nonlinearities import n_epsilon, n_epsilon_derivative
from solvers.logkdv_profiles import StationaryWave, stationary_for
from utils.perturbations import make_rng, random_even_localized
from utils.spectral import (
    apply_symbol, band_shift, cosine_basis, cosine_coefficients, default_z_grid,
    derivative_values, hat_symbol, norms, symmetrize,
)

logger = logging.getLogger(__name__)

_SINGULAR_COND = 1e14
_REFRESH_RATIO = 0.5


# ─────────────────────────────────────
# 1. THE DISCRETE FIXED-POINT PROBLEM
# ─────────────────────────────────────

class FixedPointProblem:
    """
    Symbols, masks and the even-mode basis of w = c⁻²Λ∗Ṽ′(w) on one z-grid.

    Takes raw (ε, λ) so that the degenerate ε = 0 equation can be set up too;
    there μ = 0 and the k = 0 mode is pinned to zero (zero-mean data).
    """

    def __init__(self, grid: SpectralGrid, epsilon: float, lam: float, cutoff_p: float = 2.0 / 3.0,
                 family: NonlinearityFamily = NonlinearityFamily.HERTZ_LOG, power_exponent: int = 2,
                 ball_r: float = -0.95, ball_R: float = 50.0):
        self.grid = grid
        self.epsilon = epsilon
        self.lam = lam
        self.family = family
        self.power_exponent = power_exponent
        self.ball_r = ball_r
        self.ball_R = ball_R
        self.mu = epsilon ** 2 * lam
        self.speed2 = 1.0 + self.mu
        self.cutoff = epsilon ** cutoff_p if epsilon > 0.0 else np.inf

        k = grid.wavenumbers
        self.hat = hat_symbol(k)
        gap = self.speed2 - self.hat
        self.resolvent = np.where(gap > 0.0, self.hat / np.where(gap > 0.0, gap, 1.0), 0.0)
        self.low_mask = np.abs(k) <= self.cutoff
        self.high_mask = ~self.low_mask

        self.modes = np.arange(grid.n_points // 2 + 1)
        self.basis, self.basis_norms = cosine_basis(grid, self.modes)
        mode_k = np.pi * self.modes / grid.half_width
        gap_m = self.speed2 - hat_symbol(mode_k)
        self.mode_resolvent = np.where(gap_m > 0.0, hat_symbol(mode_k) / np.where(gap_m > 0.0, gap_m, 1.0), 0.0)
        self.low_modes = np.nonzero(mode_k <= self.cutoff)[0]
        self.high_modes = np.nonzero(mode_k > self.cutoff)[0]

    @classmethod
    def from_params(cls, params: ModelParams, grid: Optional[SpectralGrid] = None) -> "FixedPointProblem":
        return cls(grid or default_z_grid(params.epsilon, params.lam), params.epsilon, params.lam,
                   params.cutoff_p, params.family, params.power_exponent, params.ball_r, params.ball_R)

    @property
    def low_block_size(self) -> int:
        return int(self.low_modes.size)

    # ─── nonlinearity ───

    def check_ball(self, w: np.ndarray) -> None:
        lo, hi = float(np.min(w)), float(np.max(w))
        if lo <= self.ball_r or hi >= self.ball_R:
            raise BallViolationError(
                f"iterate left the ball ({self.ball_r}, {self.ball_R}): min {lo:.4g}, max {hi:.4g}")

    def remainder(self, w: np.ndarray) -> np.ndarray:
        """N_ε(w) (Hertzian) or ε²w^p (power)."""
        if self.family == NonlinearityFamily.POWER:
            return self.epsilon ** 2 * w ** self.power_exponent
        return n_epsilon(w, self.epsilon)

    def remainder_slope(self, w: np.ndarray) -> np.ndarray:
        if self.family == NonlinearityFamily.POWER:
            p = self.power_exponent
            return self.epsilon ** 2 * p * w ** (p - 1)
        return n_epsilon_derivative(w, self.epsilon)

    # ─── maps ───

    def fixed_point_residual(self, w: np.ndarray) -> np.ndarray:
        """w − c⁻²Λ∗Ṽ′(w)."""
        return w - apply_symbol(w + self.remainder(w), self.hat / self.speed2)

    def resolvent_image(self, w: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """Λ̂/(1+μ−Λ̂)·F[N(w)] restricted to `mask`, back in physical space (even)."""
        symbol = self.resolvent if mask is None else np.where(mask, self.resolvent, 0.0)
        return symmetrize(apply_symbol(self.remainder(w), symbol))

    def map_A(self, w: np.ndarray) -> np.ndarray:
        """A(w) = c⁻²Λ∗Ṽ′(w), the full fixed-point map."""
        return w - self.fixed_point_residual(w)

    # ─── even-mode blocks ───

    def coefficients(self, values: np.ndarray, modes: np.ndarray) -> np.ndarray:
        return cosine_coefficients(values, self.basis[:, modes], self.basis_norms[modes])

    def synthesize(self, coeffs: np.ndarray, modes: np.ndarray) -> np.ndarray:
        return self.basis[:, modes] @ coeffs

    def coefficient_matrix(self, w: np.ndarray) -> np.ndarray:
        """Jacobian of w ↦ resolvent_image(w) in the cosine basis (all even modes)."""
        slope = self.remainder_slope(w)
        gram = (self.basis.T @ (slope[:, None] * self.basis)) / self.basis_norms[:, None]
        return self.mode_resolvent[:, None] * gram

    def contraction_ratio(self, w: np.ndarray) -> float:
        """
        Spectral radius of v ↦ χ_J c⁻²Λ̂(v + F[N(u + v)]) linearized at w = u + v,
        on the even high modes: the geometric rate of the plain iteration.

        The linearization χ_J Λ̂_c (1 + N′(w)) is similar to the symmetric
        χ_J Λ̂_c^{1/2} (1 + N′(w)) Λ̂_c^{1/2} χ_J (Λ̂ ≥ 0), so Lanczos applies.
        """
        if self.high_modes.size == 0:
            return 0.0
        root = np.sqrt(np.where(self.high_mask, self.hat / self.speed2, 0.0))
        weight = 1.0 + self.remainder_slope(w)
        n = self.grid.n_points

        def apply(x: np.ndarray) -> np.ndarray:
            half = symmetrize(apply_symbol(np.ravel(x), root))
            return symmetrize(apply_symbol(weight * half, root))

        start = np.zeros(n)
        start[int(np.argmin(np.abs(self.grid.nodes)))] = 1.0
        start = symmetrize(apply_symbol(start, self.high_mask.astype(float)))
        top = eigsh(LinearOperator((n, n), dtype=float, matvec=apply), k=1, which="LA", v0=start,
                    tol=1e-8, return_eigenvectors=False)
        return float(top[0])

    def l2(self, values: np.ndarray) -> float:
        return float(np.sqrt(self.grid.spacing * np.sum(values * values)))


def _factor(matrix: np.ndarray, label: str):
    lu, piv = lu_factor(matrix, check_finite=True)
    diag = np.abs(np.diag(lu))
    if diag.min() == 0.0 or diag.max() / diag.min() > _SINGULAR_COND:
        raise SingularJacobianError(f"{label} block is numerically singular")
    return lu, piv


# ─────────────────────────────────────
# 2. INNER PROBLEM (HIGH MODES)
# ─────────────────────────────────────

@dataclass
class InnerSolution:
    v: np.ndarray
    iterations: int
    step_ratios: List[float] = field(default_factory=list)
    refreshes: int = 0
    contraction_ratio: float = float("nan")   # rate of the plain map at the returned v
    factorization: Optional[Tuple[np.ndarray, np.ndarray]] = None


def inner_contraction(problem: FixedPointProblem, u: np.ndarray, v0: Optional[np.ndarray] = None,
                      tol: Optional[float] = None, max_iter: Optional[int] = None,
                      factorization=None) -> InnerSolution:
    """
    High-mode part v(u) of the wave for a fixed low-mode part u.

    v is the fixed point of v ↦ χ_J c⁻²Λ̂(v + F[N(u + v)]), reached by a chord
    iteration: each step solves (I − A_JJ) δ = r with A_JJ frozen,
    r = v − χ_J R F[N(u + v)]. The contraction rate of the plain map at the
    returned v must be below 1. NonContractionError is raised when it is not,
    or when the chord step ratio stays ≥ 1 for three consecutive iterations.
    """
    tol = tol or solver_settings.inner_tol
    max_iter = max_iter or solver_settings.inner_max_iter
    high = problem.high_modes
    v = np.zeros_like(u) if v0 is None else symmetrize(np.asarray(v0, dtype=float))
    result = InnerSolution(v=v, iterations=0)
    if high.size == 0:
        result.contraction_ratio = 0.0
        return result

    def refresh(w: np.ndarray):
        block = problem.coefficient_matrix(w)[np.ix_(high, high)]
        return _factor(np.eye(high.size) - block, "inner")

    lu = factorization
    prev_step = None
    streak = 0
    for it in range(1, max_iter + 1):
        w = u + v
        problem.check_ball(w)
        target = problem.resolvent_image(w, problem.high_mask)
        residual = v - target
        if lu is None:
            lu = refresh(w)
        step = problem.synthesize(lu_solve(lu, problem.coefficients(residual, high)), high)
        v = symmetrize(v - step)
        step_norm = problem.l2(step)
        result.iterations = it
        if prev_step is not None and prev_step > 0.0:
            ratio = step_norm / prev_step
            result.step_ratios.append(ratio)
            streak = streak + 1 if ratio >= 1.0 else 0
            if streak >= 3:
                raise NonContractionError(
                    f"inner iteration ratio >= 1 for 3 steps (last {ratio:.3f})",
                    residual=step_norm, iterations=it)
            if ratio > _REFRESH_RATIO and step_norm > tol:
                lu = refresh(u + v)
                result.refreshes += 1
        prev_step = step_norm
        if step_norm <= tol:
            break
    else:
        raise NonConvergenceError(f"inner iteration did not reach {tol:.1e} in {max_iter} steps",
                                  residual=prev_step, iterations=max_iter)
    result.v = v
    result.factorization = lu
    result.contraction_ratio = problem.contraction_ratio(u + v)
    logger.info(f"inner: {result.iterations} steps, contraction ratio {result.contraction_ratio:.6f}, "
                f"refreshes {result.refreshes}")
    if result.contraction_ratio >= 1.0:
        raise NonContractionError(
            f"high-mode map is not a contraction at this u (ratio {result.contraction_ratio:.6f})",
            residual=prev_step, iterations=result.iterations)
    return result


# ─────────────────────────────────────
# 3. OUTER PROBLEM (LOW MODES)
# ─────────────────────────────────────

@dataclass
class OuterSolution:
    u: np.ndarray
    v: np.ndarray
    iterations: int
    inner_iterations: int
    residual_history: List[float] = field(default_factory=list)
    contraction_ratio: float = float("nan")
    max_inner_ratio: float = 0.0


def low_mode_residual(problem: FixedPointProblem, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """G(u) = u − χ_I R F[N(u + v)], zero exactly at the wave."""
    return u - problem.resolvent_image(u + v, problem.low_mask)


def outer_newton(problem: FixedPointProblem, u0: np.ndarray, tol: Optional[float] = None,
                 max_iter: Optional[int] = None) -> OuterSolution:
    """Newton on the low-mode equation with v = v(u) eliminated through the Schur complement."""
    tol = tol or solver_settings.outer_tol
    max_iter = max_iter or solver_settings.outer_max_iter
    low, high = problem.low_modes, problem.high_modes
    u = symmetrize(np.asarray(u0, dtype=float))
    inner = inner_contraction(problem, u)
    inner_total = inner.iterations
    contraction_ratio = inner.contraction_ratio
    max_ratio = max(inner.step_ratios, default=0.0)
    v = inner.v
    residual = low_mode_residual(problem, u, v)
    history = [problem.l2(residual)]

    for it in range(1, max_iter + 1):
        full = problem.coefficient_matrix(u + v)
        a_ll = full[np.ix_(low, low)]
        a_lh = full[np.ix_(low, high)]
        a_hl = full[np.ix_(high, low)]
        lu_hh = _factor(np.eye(high.size) - full[np.ix_(high, high)], "high") if high.size else None
        schur = np.eye(low.size) - a_ll
        if high.size:
            schur -= a_lh @ lu_solve(lu_hh, a_hl)
        if np.linalg.cond(schur) > _SINGULAR_COND:
            raise SingularJacobianError("low-mode Schur complement is numerically singular")
        direction = problem.synthesize(np.linalg.solve(schur, -problem.coefficients(residual, low)), low)

        current = history[-1]
        accepted = False
        scale = 1.0
        for _ in range(solver_settings.damping_halvings + 1):
            trial_u = symmetrize(u + scale * direction)
            try:
                trial_inner = inner_contraction(problem, trial_u, v, factorization=lu_hh)
            except (BallViolationError, NonContractionError):
                scale *= 0.5
                continue
            trial_residual = low_mode_residual(problem, trial_u, trial_inner.v)
            trial_norm = problem.l2(trial_residual)
            if trial_norm < current or problem.l2(scale * direction) <= tol:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            raise NonConvergenceError(f"outer Newton could not decrease the residual at step {it}",
                                      residual=current, iterations=it)

        step_norm = problem.l2(scale * direction)
        u, v, residual = trial_u, trial_inner.v, trial_residual
        inner_total += trial_inner.iterations
        max_ratio = max([max_ratio] + trial_inner.step_ratios)
        contraction_ratio = trial_inner.contraction_ratio
        history.append(trial_norm)
        logger.debug(f"outer step {it}: |du|={step_norm:.3e}, |G|={trial_norm:.3e}, damping {scale:g}")
        if step_norm <= tol:
            return OuterSolution(u=u, v=v, iterations=it, inner_iterations=inner_total,
                                 residual_history=history, contraction_ratio=contraction_ratio,
                                 max_inner_ratio=max_ratio)
    raise NonConvergenceError(f"outer Newton did not converge in {max_iter} steps",
                              residual=history[-1], iterations=max_iter)


# ─────────────────────────────────────
# 4. ASSEMBLY
# ─────────────────────────────────────

@dataclass(frozen=True)
class TravellingWaveResult:
    """w_stat,ε with its momentum, and how it was obtained."""
    strain: WaveProfile
    momentum: WaveProfile
    speed: float
    params: ModelParams
    iterations: Tuple[int, int]            # (inner total, outer)
    residual_norm: float
    theorem1_errors: Dict[int, float]
    low_part: WaveProfile
    high_part: WaveProfile
    reference: WaveProfile                 # W_stat(ε·) on the same z-grid
    diagnostics: Dict[str, float] = field(default_factory=dict)


def momentum_from_strain(strain: WaveProfile, c: float) -> WaveProfile:
    """
    p̂ = −c·ik·ŵ/(e^{ik} − 1), p̂(0) = −c·ŵ(0), so that −c w′(z) = p(z+1) − p(z).

    Where e^{ik} = 1 on the grid (k = 2πm) the divisor vanishes; ŵ is negligible there and p̂ is set to 0.
    """
    k = strain.grid.wavenumbers
    divisor = np.exp(1j * k) - 1.0
    tiny = np.abs(divisor) < 1e-12
    symbol = np.where(tiny, 0.0, -c * 1j * k / np.where(tiny, 1.0, divisor))
    symbol[k == 0.0] = -c
    values = np.real(np.fft.ifft(symbol * np.fft.fft(strain.values)))
    return WaveProfile(strain.grid, values, strain.variable_tag, Parity.NONE)


def advance_residuals(strain: WaveProfile, momentum: WaveProfile, c: float,
                      problem: FixedPointProblem) -> Tuple[float, float]:
    """
    sup-norms of the two advance equations of a travelling wave:
      −c w′(z) = p(z+1) − p(z),   −c p′(z) = Ṽ′(w(z)) − Ṽ′(w(z−1)).
    """
    grid = strain.grid
    w, p = strain.values, momentum.values
    w_prime = derivative_values(w, grid, 1)
    p_prime = derivative_values(p, grid, 1)
    first = -c * w_prime - (band_shift(momentum, 1.0).values - p)
    force_values = w + problem.remainder(w)
    force_profile = strain.with_values(force_values, Parity.NONE)
    second = -c * p_prime - (force_values - band_shift(force_profile, -1.0).values)
    return float(np.max(np.abs(first))), float(np.max(np.abs(second)))


def theorem1_errors(strain: WaveProfile, reference: WaveProfile, epsilon: float) -> Dict[int, float]:
    """k = 0: sup|w − W(εz)|,  k = 1: sup|∂_z w − ε W′(εz)| (reference already sampled at εz)."""
    grid = strain.grid
    zeroth = float(np.max(np.abs(strain.values - reference.values)))
    first = float(np.max(np.abs(derivative_values(strain.values - reference.values, grid, 1))))
    return {0: zeroth, 1: first}


def reference_profile(wave: StationaryWave, grid: SpectralGrid, epsilon: float) -> WaveProfile:
    return wave.on_grid(grid, scale=epsilon, variable_tag=VariableTag.Z_SCALE)


def solve_travelling_wave(params: ModelParams, grid: Optional[SpectralGrid] = None,
                          wave: Optional[StationaryWave] = None) -> TravellingWaveResult:
    """Two-scale solve of the lattice travelling wave, checked against the full fixed-point residual."""
    problem = FixedPointProblem.from_params(params, grid)
    grid = problem.grid
    wave = wave or stationary_for(params)
    reference = reference_profile(wave, grid, params.epsilon)
    w_app = np.real(np.fft.ifft(np.where(problem.low_mask, np.fft.fft(reference.values), 0.0)))

    logger.info(f"travelling wave eps={params.epsilon}, lambda={params.lam}: grid {grid.n_points} pts, "
                f"low block {problem.low_block_size} modes")
    outer = outer_newton(problem, w_app)
    w = symmetrize(outer.u + outer.v)
    problem.check_ball(w)
    residual = float(np.max(np.abs(problem.fixed_point_residual(w))))
    if residual > solver_settings.fixed_point_residual_tol:
        raise NonConvergenceError(f"fixed-point residual {residual:.3e} above "
                                  f"{solver_settings.fixed_point_residual_tol:.1e}", residual=residual)

    strain = WaveProfile(grid, w, VariableTag.Z_SCALE, Parity.EVEN)
    momentum = momentum_from_strain(strain, params.speed)
    errors = theorem1_errors(strain, reference, params.epsilon)
    adv1, adv2 = advance_residuals(strain, momentum, params.speed, problem)
    u_norm = problem.l2(outer.u)
    diagnostics = {
        "low_block_size": float(problem.low_block_size),
        "grid_points": float(grid.n_points),
        "grid_half_width": grid.half_width,
        "contraction_ratio": outer.contraction_ratio,
        "max_inner_step_ratio": outer.max_inner_ratio,
        "u_l2_scaled": u_norm * np.sqrt(params.epsilon),
        "v_bound_constant": (problem.l2(outer.v) / (params.epsilon ** (2.0 - 2.0 * params.cutoff_p) * u_norm)
                             if u_norm > 0.0 else 0.0),
        "u_minus_w_app_l2": problem.l2(outer.u - w_app),
        "advance_residual_first": adv1,
        "advance_residual_second": adv2,
        "strain_min": float(np.min(w)),
        "strain_max": float(np.max(w)),
    }
    logger.info(f"  converged: outer {outer.iterations}, inner {outer.inner_iterations}, "
                f"residual {residual:.2e}, errors k=0 {errors[0]:.3e}, k=1 {errors[1]:.3e}")
    return TravellingWaveResult(
        strain=strain,
        momentum=momentum,
        speed=params.speed,
        params=params,
        iterations=(outer.inner_iterations, outer.iterations),
        residual_norm=residual,
        theorem1_errors=errors,
        low_part=WaveProfile(grid, outer.u, VariableTag.Z_SCALE, Parity.EVEN),
        high_part=WaveProfile(grid, outer.v, VariableTag.Z_SCALE, Parity.EVEN),
        reference=reference,
        diagnostics=diagnostics,
    )


def low_mode_defect(params: ModelParams, grid: Optional[SpectralGrid] = None,
                    wave: Optional[StationaryWave] = None) -> float:
    """‖G(W_app)‖_{L²}: how far W_app is from solving the low-mode equation once v(W_app) is found."""
    problem = FixedPointProblem.from_params(params, grid)
    wave = wave or stationary_for(params)
    reference = reference_profile(wave, problem.grid, params.epsilon)
    w_app = np.real(np.fft.ifft(np.where(problem.low_mask, np.fft.fft(reference.values), 0.0)))
    inner = inner_contraction(problem, w_app)
    return problem.l2(low_mode_residual(problem, w_app, inner.v))


# ─────────────────────────────────────
# 5. FULL NEWTON ORACLE
# ─────────────────────────────────────

def full_newton_oracle(problem: FixedPointProblem, initial: np.ndarray, tol: Optional[float] = None,
                       max_iter: Optional[int] = None) -> WaveProfile:
    """
    Damped Newton–GMRES on w − c⁻²Λ∗Ṽ′(w) = 0 over the whole grid.

    Preconditioner: the inverse of the symbol 1 − Λ̂(1+ε²)/c². Where that symbol
    vanishes (the k = 0 mode when ε = 0) the equation leaves the mode free; it is
    projected out of the start and of every step, so the k = 0 coefficient of the
    result is zero and nonzero-mean small data still returns w = 0.
    """
    tol = tol or solver_settings.fixed_point_residual_tol
    max_iter = max_iter or solver_settings.outer_max_iter
    n = problem.grid.n_points
    hat_c = problem.hat / problem.speed2
    precond_symbol = 1.0 - hat_c * (1.0 + problem.epsilon ** 2)
    kept = np.abs(precond_symbol) > 1e-14
    precond_symbol = np.where(kept, 1.0 / np.where(kept, precond_symbol, 1.0), 0.0)
    kernel = None if np.all(kept) else kept.astype(float)

    def pin(x: np.ndarray) -> np.ndarray:
        return x if kernel is None else symmetrize(apply_symbol(x, kernel))

    precond = LinearOperator((n, n), dtype=float, matvec=lambda x: apply_symbol(x, precond_symbol))

    w = pin(symmetrize(np.asarray(initial, dtype=float)))
    residual = problem.fixed_point_residual(w)
    norm = float(np.max(np.abs(residual)))
    for it in range(1, max_iter + 1):
        if norm <= tol:
            logger.debug(f"oracle converged after {it - 1} steps, residual {norm:.2e}")
            return WaveProfile(problem.grid, w, VariableTag.Z_SCALE, Parity.EVEN)
        slope = problem.remainder_slope(w)
        jac = LinearOperator((n, n), dtype=float,
                             matvec=lambda x, s=slope: x - apply_symbol(x + s * x, hat_c))
        delta, info = gmres(jac, -residual, rtol=1e-13, atol=0.0, restart=solver_settings.gmres_restart,
                            maxiter=50, M=precond)
        delta = pin(delta)
        scale = 1.0
        for _ in range(solver_settings.damping_halvings + 1):
            trial = symmetrize(w + scale * delta)
            if np.min(trial) > problem.ball_r:
                trial_residual = problem.fixed_point_residual(trial)
                trial_norm = float(np.max(np.abs(trial_residual)))
                if trial_norm < norm:
                    break
            scale *= 0.5
        else:
            raise NonConvergenceError(f"oracle damping exhausted at step {it}", residual=norm, iterations=it)
        w, residual, norm = trial, trial_residual, trial_norm
        logger.debug(f"oracle step {it}: residual {norm:.3e} (gmres info {info}, damping {scale:g})")
    if norm <= tol:
        return WaveProfile(problem.grid, w, VariableTag.Z_SCALE, Parity.EVEN)
    raise NonConvergenceError(f"oracle did not converge in {max_iter} steps", residual=norm, iterations=max_iter)


def oracle_travelling_wave(params: ModelParams, grid: Optional[SpectralGrid] = None,
                           wave: Optional[StationaryWave] = None) -> WaveProfile:
    """full_newton_oracle started from W_stat(ε·)."""
    problem = FixedPointProblem.from_params(params, grid)
    wave = wave or stationary_for(params)
    start = reference_profile(wave, problem.grid, params.epsilon)
    return full_newton_oracle(problem, start.values)


# ─────────────────────────────────────
# 6. TRIVIAL-SOLUTION CHECK
# ─────────────────────────────────────

@dataclass
class SmallSolutionReport:
    lam: float
    radius: float
    epsilon: float
    converged: List[bool]
    iterations: List[int]
    max_ratio: float
    ratio_bound: float

    @property
    def all_converged(self) -> bool:
        return all(self.converged)


def contraction_bound(epsilon: float, lam: float, radius: float) -> float:
    """(1+ε²)(1+R)^{ε²}/(1+ε²λ): sup of Ṽ″ on [0, R] over c²."""
    return (1.0 + epsilon ** 2) * (1.0 + radius) ** (epsilon ** 2) / (1.0 + epsilon ** 2 * lam)


def small_solution_check(lam: float, radius: float, epsilon: float, trials: int = 20, seed: int = 0,
                         grid: Optional[SpectralGrid] = None, max_iter: int = 500,
                         tol: float = 1e-12) -> SmallSolutionReport:
    """
    Iterate A(w) = c⁻²Λ∗Ṽ′(w) from random non-negative even data of size
    max(‖·‖_{L²}, ‖·‖_sup) = R and record whether it reaches 0.

    Divergence is logged and reported, never raised.
    """
    params = ModelParams(epsilon=epsilon, lam=lam, ball_R=max(50.0, 2.0 * radius))
    problem = FixedPointProblem.from_params(params, grid)
    rng = make_rng(seed)
    bound = contraction_bound(epsilon, lam, radius)
    converged, iterations = [], []
    worst_ratio = 0.0
    for trial in range(trials):
        w = random_even_localized(problem.grid, radius, rng)
        size = max(problem.l2(w), norms(w, "sup"))
        done = False
        for it in range(1, max_iter + 1):
            w = symmetrize(problem.map_A(w))
            new_size = max(problem.l2(w), norms(w, "sup"))
            if size > 0.0:
                worst_ratio = max(worst_ratio, new_size / size)
            size = new_size
            if size < tol:
                done = True
                break
        converged.append(done)
        iterations.append(it)
        if not done:
            logger.warning(f"trial {trial}: iterate size {size:.3e} after {max_iter} steps "
                           f"(lambda={lam} may be below the contraction threshold)")
    logger.info(f"small-solution check lambda={lam}, R={radius}, eps={epsilon}: "
                f"{sum(converged)}/{trials} converged, max ratio {worst_ratio:.4f} (bound {bound:.4f})")
    return SmallSolutionReport(lam=lam, radius=radius, epsilon=epsilon, converged=converged,
                               iterations=iterations, max_ratio=worst_ratio, ratio_bound=bound)
