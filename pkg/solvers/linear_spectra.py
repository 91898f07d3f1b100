"""
solvers/linear_spectra.py
─────────────────────────
Dense discretizations of the operators linearized at W_stat, and their spectra.

  L_λ      = −∂²/12 + λ − g′(W_stat)                 (Schrödinger form)
  K        = −∂²/12 + λ − g′(0)                       (free part, SPD)
  Q        = g′(W_stat) − g′(0)                       (decaying potential)
  S_λ      = K⁻¹Q,  symmetrized as K^{−1/2} Q K^{−1/2}
  S_{λ,p}  = χ K⁻¹ Q with χ the indicator of |k| ≤ cutoff

For the Hertzian family g′(W) = 1 + log(1+W), so Q = diag(log(1+W_stat)).
K is a circulant with an even real symbol, so K^{±1/2} are exact circulants.

Expected structure (checked by the tests and the `spectrum` subcommand):
  - L_λ: one negative eigenvalue (constant-sign eigenvector), a simple zero
    mode W′_stat, everything else positive; modes below λ − 1 are localized
  - S_sym: non-negative, one eigenvalue above 1, eigenvalue 1 simple
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import circulant, eigh

from core.exceptions import NonConvergenceError
from core.models import OperatorKind, SpectralGrid
from solvers.logkdv_profiles import StationaryWave
from utils.perturbations import make_rng
from utils.spectral import apply_symbol, derivative_values

logger = logging.getLogger(__name__)


# ─────────────────────────────────────
# TYPES
# ─────────────────────────────────────

@dataclass(frozen=True)
class OperatorMatrix:
    """A dense operator on the grid functions of `grid`."""
    entries: np.ndarray
    grid: SpectralGrid
    kind: OperatorKind
    symmetric: bool = True

    def __post_init__(self):
        if self.entries.shape != (self.grid.n_points, self.grid.n_points):
            raise ValueError(f"operator of shape {self.entries.shape} for a grid of {self.grid.n_points} points")
        if self.symmetric:
            scale = max(float(np.max(np.abs(self.entries))), 1.0)
            asym = float(np.max(np.abs(self.entries - self.entries.T)))
            if asym > 1e-12 * scale:
                raise ValueError(f"matrix flagged symmetric has asymmetry {asym:.2e}")

    @property
    def dim(self) -> int:
        return self.grid.n_points


@dataclass
class SpectralSummary:
    """Eigen-decomposition of an OperatorMatrix classified around a pivot value."""
    kind: OperatorKind
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    pivot: float
    tolerance: float
    below: int
    at: int
    above: int
    gap_above: float                 # distance from the pivot to the next eigenvalue above
    gap_below: float                 # distance from the pivot to the next eigenvalue below
    reconstruction_error: float
    alignments: Dict[str, float] = field(default_factory=dict)

    def to_diagnostics(self) -> Dict[str, float]:
        out = {
            "kind": self.kind.value,
            "pivot": self.pivot,
            "count_below": self.below,
            "count_at": self.at,
            "count_above": self.above,
            "gap_above": self.gap_above,
            "gap_below": self.gap_below,
            "lowest": float(self.eigenvalues[0]),
            "highest": float(self.eigenvalues[-1]),
            "reconstruction_error": self.reconstruction_error,
        }
        out.update({f"alignment_{name}": value for name, value in self.alignments.items()})
        return out

    def eigenvector_near(self, value: float) -> np.ndarray:
        return self.eigenvectors[:, int(np.argmin(np.abs(self.eigenvalues - value)))]


# ─────────────────────────────────────
# 1. MATRIX BUILDERS
# ─────────────────────────────────────

def circulant_of(grid: SpectralGrid, symbol: np.ndarray) -> np.ndarray:
    """Dense matrix of the Fourier multiplier `symbol` (real and even → real symmetric)."""
    column = np.real(np.fft.ifft(symbol))
    return circulant(column)


def _free_symbol(wave: StationaryWave, grid: SpectralGrid) -> np.ndarray:
    return wave.lam - float(wave.flux(0.0, 1)) + grid.wavenumbers ** 2 / 12.0


def _potential(wave: StationaryWave) -> np.ndarray:
    values = wave.profile.values
    return np.asarray(wave.flux(values, 1), dtype=float) - float(wave.flux(0.0, 1))


def build_L(wave: StationaryWave) -> OperatorMatrix:
    """−D²/12 + λ − g′(W_stat) with D² the spectral second-derivative matrix."""
    grid = wave.profile.grid
    second = circulant_of(grid, -grid.wavenumbers ** 2)
    shift = wave.lam - float(wave.flux(0.0, 1))
    entries = -second / 12.0 + shift * np.eye(grid.n_points) - np.diag(_potential(wave))
    entries = 0.5 * (entries + entries.T)
    return OperatorMatrix(entries, grid, OperatorKind.L_LAMBDA)


def build_S_sym(wave: StationaryWave, cutoff: Optional[float] = None) -> OperatorMatrix:
    """K^{−1/2} Q K^{−1/2}, or (χK^{−1/2}) Q (χK^{−1/2}) when a cutoff is given."""
    grid = wave.profile.grid
    root = _free_symbol(wave, grid) ** -0.5
    kind = OperatorKind.S_LAMBDA_SYM
    if cutoff is not None:
        root = np.where(np.abs(grid.wavenumbers) <= cutoff, root, 0.0)
        kind = OperatorKind.S_LAMBDA_P_SYM
    half = circulant_of(grid, root)
    entries = half @ (_potential(wave)[:, None] * half)
    entries = 0.5 * (entries + entries.T)
    return OperatorMatrix(entries, grid, kind)


def half_power_free(wave: StationaryWave, values: np.ndarray) -> np.ndarray:
    """K^{1/2} applied to grid values."""
    grid = wave.profile.grid
    return apply_symbol(values, np.sqrt(_free_symbol(wave, grid)))


# ─────────────────────────────────────
# 2. SPECTRAL REPORT
# ─────────────────────────────────────

def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return 0.0 if denom == 0.0 else float(abs(np.dot(a, b)) / denom)


def spectral_report(op: OperatorMatrix, pivot: float = 0.0, tolerance: float = 1e-6,
                    designated: Optional[Dict[str, Tuple[float, np.ndarray]]] = None) -> SpectralSummary:
    """
    Symmetric eigendecomposition classified as below / at / above `pivot`.

    `designated` maps a name to (target eigenvalue, vector); the summary
    records |cos| between the vector and the eigenvector nearest the target.
    """
    if not op.symmetric:
        raise ValueError("spectral_report needs a symmetric operator")
    try:
        values, vectors = eigh(op.entries)
    except np.linalg.LinAlgError as exc:
        raise NonConvergenceError(f"eigensolver failed on {op.kind.value}: {exc}") from exc

    scale = max(float(np.max(np.abs(values))), 1.0)
    reconstruction = float(np.max(np.abs(op.entries - (vectors * values) @ vectors.T))) / scale

    below_mask = values < pivot - tolerance
    above_mask = values > pivot + tolerance
    at_count = int(values.size - below_mask.sum() - above_mask.sum())
    gap_above = float(values[above_mask].min() - pivot) if above_mask.any() else float("inf")
    gap_below = float(pivot - values[below_mask].max()) if below_mask.any() else float("inf")

    summary = SpectralSummary(
        kind=op.kind, eigenvalues=values, eigenvectors=vectors, pivot=pivot, tolerance=tolerance,
        below=int(below_mask.sum()), at=at_count, above=int(above_mask.sum()),
        gap_above=gap_above, gap_below=gap_below, reconstruction_error=reconstruction,
    )
    for name, (target, vector) in (designated or {}).items():
        summary.alignments[name] = _cosine(summary.eigenvector_near(target), vector)
    logger.info(f"{op.kind.value}: {summary.below} below / {summary.at} at / {summary.above} above "
                f"{pivot:g} (tol {tolerance:.1e}), gaps {gap_below:.4g} | {gap_above:.4g}")
    return summary


def localized_fraction(vector: np.ndarray, grid: SpectralGrid) -> float:
    """Share of ‖vector‖² carried by the outer half |x| > L/2 of the domain."""
    outer = np.abs(grid.nodes) > 0.5 * grid.half_width
    total = float(np.sum(vector ** 2))
    return 0.0 if total == 0.0 else float(np.sum(vector[outer] ** 2) / total)


def continuous_floor_violations(summary: SpectralSummary, grid: SpectralGrid, floor: float,
                                max_outer_fraction: float = 0.25) -> List[float]:
    """Eigenvalues below `floor` whose eigenvector is spread out (not a bound state)."""
    offenders = []
    for idx in np.nonzero(summary.eigenvalues < floor)[0]:
        if localized_fraction(summary.eigenvectors[:, idx], grid) >= max_outer_fraction:
            offenders.append(float(summary.eigenvalues[idx]))
    return offenders


def report_L(wave: StationaryWave) -> SpectralSummary:
    """L_λ classified around 0, zero-mode tolerance 1e−6·(λ−1), aligned with W′_stat."""
    grid = wave.profile.grid
    slope = derivative_values(wave.profile.values, grid, 1)
    return spectral_report(build_L(wave), pivot=0.0, tolerance=1e-6 * (wave.lam - 1.0),
                           designated={"translation_mode": (0.0, slope)})


def report_S(wave: StationaryWave, cutoff: Optional[float] = None) -> SpectralSummary:
    """S_sym classified around 1, with the eigenvalue-1 vector compared to K^{1/2}W′_stat."""
    grid = wave.profile.grid
    slope = derivative_values(wave.profile.values, grid, 1)
    return spectral_report(build_S_sym(wave, cutoff), pivot=1.0, tolerance=1e-6 * (wave.lam - 1.0),
                           designated={"translation_mode": (1.0, half_power_free(wave, slope))})


# ─────────────────────────────────────
# 3. TRUNCATION DEVIATION
# ─────────────────────────────────────

def x_scale_cutoff(epsilon: float, cutoff_p: float) -> float:
    """The z-scale split |k| ≤ ε^p seen on the x-scale: |k| ≤ ε^{p−1}."""
    return epsilon ** (cutoff_p - 1.0)


def truncation_bound(wave: StationaryWave, epsilon: float, cutoff_p: float) -> float:
    """12·ε^{2−2p}·‖W_stat‖_sup."""
    return 12.0 * epsilon ** (2.0 - 2.0 * cutoff_p) * float(np.max(np.abs(wave.profile.values)))


def truncation_deviation(wave: StationaryWave, cutoff: float, trials: int = 100, seed: int = 0) -> float:
    """
    max over random unit U of ‖(S_λ − S_{λ,p})U‖_{L²} = ‖(1 − χ) K⁻¹ Q U‖_{L²}.

    Computed with FFTs (no dense matrix); U is Gaussian white noise normalized in L².
    """
    grid = wave.profile.grid
    high = np.abs(grid.wavenumbers) > cutoff
    if not high.any():
        return 0.0
    symbol = np.where(high, 1.0 / _free_symbol(wave, grid), 0.0)
    potential = _potential(wave)
    rng = make_rng(seed)
    h = grid.spacing
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(grid.n_points)
        u /= np.sqrt(h * np.sum(u * u))
        image = apply_symbol(potential * u, symbol)
        worst = max(worst, float(np.sqrt(h * np.sum(image * image))))
    logger.debug(f"truncation deviation at cutoff {cutoff:.4g}: {worst:.4e} over {trials} trials")
    return worst
