"""
utils/spectral.py
─────────────────
Periodic grids, FFT calculus and the discrete norms every bound is measured in.

Everything here treats a WaveProfile as the band-limited trigonometric
interpolant of its samples:
  - derivatives, the hat-kernel convolution Λ∗ and translations are Fourier
    multipliers (exact for band-limited data)
  - off-grid evaluation (lattice sampling at ε(n − t)) is the same interpolant
    evaluated at arbitrary points
  - even profiles stay full-length; `cosine_basis` spans exactly the even grid
    functions when a dense even-mode block is needed

Grid conventions: nodes −L + j·h, wavenumbers πm/L in FFT order.
"""

import logging
import math
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import grid_settings, solver_settings
from core.exceptions import ResolutionError
from core.models import Parity, SpectralGrid, VariableTag, WaveProfile, reflect

logger = logging.getLogger(__name__)

_TAYLOR_CUTOFF = 1e-4
_EVAL_CHUNK = 512


# ─────────────────────────────────────
# 1. GRIDS
# ─────────────────────────────────────

def make_grid(n_points: int, half_width: float) -> SpectralGrid:
    return SpectralGrid(n_points=n_points, half_width=half_width)


def decay_rate_of(lam: float) -> float:
    return math.sqrt(12.0 * (lam - 1.0))


def default_x_grid(lam: float, n_points: Optional[int] = None,
                   half_width: Optional[float] = None) -> SpectralGrid:
    """x-scale grid for W_stat: half-width max(20, 12/κ_λ), 2048 points."""
    if half_width is None:
        half_width = max(grid_settings.x_min_half_width, 12.0 / decay_rate_of(lam))
    return make_grid(n_points or grid_settings.x_points, half_width)


def default_z_grid(epsilon: float, lam: float) -> SpectralGrid:
    """
    z-scale grid for the lattice travelling wave.

    Spacing is exactly 1/q (q = oversampling) so unit shifts are index shifts;
    half-width n/(2q) is the first power-of-two size reaching
    max(40/(ε·κ_λ), 50), which keeps e^{−εκ_λ|z|} tails below 1e−14.
    """
    q = grid_settings.oversampling
    required = max(40.0 / (epsilon * decay_rate_of(lam)), grid_settings.z_min_half_width)
    n_points = 16
    while n_points / (2.0 * q) < required:
        n_points *= 2
    return make_grid(n_points, n_points / (2.0 * q))


def ring_grid(n_sites: int, scale: float = 1.0, oversampling: Optional[int] = None) -> SpectralGrid:
    """
    Grid covering exactly one period of an N-site ring.

    scale = 1 gives the z-scale (spacing 1/q), scale = ε the ξ-scale (spacing ε/q).
    Lattice site i ∈ [0, N) sits on node q·i, i.e. at position scale·(i − N/2).
    """
    q = oversampling or grid_settings.oversampling
    return make_grid(n_sites * q, 0.5 * scale * n_sites)


def embed(profile: WaveProfile, grid: SpectralGrid) -> WaveProfile:
    """Zero-pad a profile onto a wider grid with the same spacing and aligned nodes."""
    src = profile.grid
    if not math.isclose(src.spacing, grid.spacing, rel_tol=1e-12):
        raise ResolutionError("embed needs grids with identical spacing")
    offset = (src.half_width - grid.half_width) / grid.spacing
    start = -int(round(offset))
    if abs(offset + start) > 1e-6 or start < 0 or start + src.n_points > grid.n_points:
        raise ResolutionError("embed needs the target grid to contain the source nodes")
    values = np.zeros(grid.n_points)
    values[start:start + src.n_points] = profile.values
    return WaveProfile(grid, values, profile.variable_tag, profile.parity)


# ─────────────────────────────────────
# 2. FOURIER MULTIPLIERS
# ─────────────────────────────────────

def apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    return np.real(np.fft.ifft(symbol * np.fft.fft(values)))


def nyquist_energy_fraction(values: np.ndarray) -> float:
    spectrum = np.abs(np.fft.fft(values)) ** 2
    total = spectrum.sum()
    if total == 0.0:
        return 0.0
    return float(spectrum[values.size // 2] / total)


def _check_resolution(f: WaveProfile, operation: str) -> None:
    fraction = nyquist_energy_fraction(f.values)
    if fraction > solver_settings.nyquist_energy_warn:
        logger.warning(f"{operation}: Nyquist-mode energy fraction {fraction:.2e} "
                       f"on {f.grid.n_points} points (under-resolved)")


def spectral_derivative(f: WaveProfile, order: int = 1) -> WaveProfile:
    """Multiply by (ik)^order; the Nyquist mode is dropped for odd orders."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    _check_resolution(f, "spectral_derivative")
    k = f.grid.wavenumbers
    symbol = (1j * k) ** order
    if order % 2 == 1:
        symbol[f.grid.n_points // 2] = 0.0
    parity = f.parity if order % 2 == 0 else Parity.NONE
    return WaveProfile(f.grid, apply_symbol(f.values, symbol), f.variable_tag, parity)


def derivative_values(values: np.ndarray, grid: SpectralGrid, order: int = 1) -> np.ndarray:
    """spectral_derivative on a bare array (no resolution diagnostic)."""
    k = grid.wavenumbers
    symbol = (1j * k) ** order
    if order % 2 == 1:
        symbol[grid.n_points // 2] = 0.0
    return apply_symbol(values, symbol)


def hat_symbol(k: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Λ̂(k) = 4 sin²(k/2)/k², Taylor form 1 − k²/12 + k⁴/360 for |k| < 1e−4."""
    arr = np.asarray(k, dtype=float)
    small = np.abs(arr) < _TAYLOR_CUTOFF
    safe = np.where(small, 1.0, arr)
    direct = (2.0 * np.sin(0.5 * safe) / safe) ** 2
    k2 = arr * arr
    value = np.where(small, 1.0 - k2 / 12.0 + k2 * k2 / 360.0, direct)
    return float(value) if np.ndim(k) == 0 else value


def hat_convolve(f: WaveProfile) -> WaveProfile:
    """Λ∗f with the tent kernel (1 − |z|)₊, via its symbol."""
    if f.grid.spacing > 0.5:
        raise ResolutionError(f"hat_convolve needs spacing <= 0.5, got {f.grid.spacing:.3g}")
    _check_resolution(f, "hat_convolve")
    values = apply_symbol(f.values, hat_symbol(f.grid.wavenumbers))
    return f.with_values(values)


def shift_symbol(grid: SpectralGrid, a: float) -> np.ndarray:
    return np.exp(1j * grid.wavenumbers * a)


def band_shift(f: WaveProfile, a: float) -> WaveProfile:
    """f(· + a) for the band-limited interpolant."""
    if a == 0.0:
        return f
    return WaveProfile(f.grid, apply_symbol(f.values, shift_symbol(f.grid, a)), f.variable_tag, Parity.NONE)


def discrete_laplacian(f: WaveProfile) -> WaveProfile:
    """Δf(z) = f(z+1) − 2f(z) + f(z−1)."""
    symbol = 2.0 * np.cos(f.grid.wavenumbers) - 2.0
    return f.with_values(apply_symbol(f.values, symbol))


def low_pass_split(f: WaveProfile, cutoff: float) -> Tuple[WaveProfile, WaveProfile]:
    """(low, high) with spectra in |k| ≤ cutoff and |k| > cutoff; low + high = f."""
    if not 0.0 < cutoff < f.grid.nyquist:
        raise ValueError(f"cutoff must lie in (0, {f.grid.nyquist:.6g}), got {cutoff}")
    mask = np.abs(f.grid.wavenumbers) <= cutoff
    spectrum = np.fft.fft(f.values)
    low = np.real(np.fft.ifft(np.where(mask, spectrum, 0.0)))
    return f.with_values(low), f.with_values(f.values - low)


def symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + reflect(values))


# ─────────────────────────────────────
# 3. OFF-GRID EVALUATION AND LATTICE SAMPLING
# ─────────────────────────────────────

def band_evaluate(f: WaveProfile, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of f at arbitrary points (periodic)."""
    grid = f.grid
    n = grid.n_points
    coeffs = np.fft.rfft(f.values) / n
    weights = np.full(coeffs.size, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    coeffs = coeffs * weights
    k = 2.0 * np.pi * np.arange(coeffs.size) / (2.0 * grid.half_width)
    points = np.asarray(points, dtype=float)
    out = np.empty(points.size)
    flat = points.ravel() + grid.half_width
    for start in range(0, flat.size, _EVAL_CHUNK):
        chunk = flat[start:start + _EVAL_CHUNK]
        phases = np.exp(1j * np.outer(chunk, k))
        out[start:start + _EVAL_CHUNK] = np.real(phases @ coeffs)
    return out.reshape(points.shape)


def sample_to_lattice(X: WaveProfile, epsilon: float, n_range: Union[Iterable[int], np.ndarray],
                      shift: float = 0.0) -> np.ndarray:
    """
    x_n = X(ε(n − shift)) for n in n_range.

    When ε is an integer multiple q of the grid spacing this is one band-limited
    shift followed by striding; otherwise the interpolant is summed directly.
    """
    n = np.asarray(list(n_range) if not isinstance(n_range, np.ndarray) else n_range, dtype=int)
    grid = X.grid
    ratio = epsilon / grid.spacing
    q = int(round(ratio))
    if q >= 1 and abs(ratio - q) < 1e-9:
        values = X.values if shift == 0.0 else apply_symbol(X.values, shift_symbol(grid, -epsilon * shift))
        index = (n * q + grid.n_points // 2) % grid.n_points
        return values[index]
    return band_evaluate(X, epsilon * (n - shift))


def ring_sample(profile: WaveProfile, n_sites: int, shift: float = 0.0) -> np.ndarray:
    """
    Sample a ring-grid profile (see ring_grid) at every site i, displaced by −shift
    in the profile's own variable: returns profile(position_i − shift).
    """
    grid = profile.grid
    q = grid.n_points // n_sites
    if q * n_sites != grid.n_points:
        raise ResolutionError("profile grid is not a ring grid for this number of sites")
    values = profile.values if shift == 0.0 else apply_symbol(profile.values, shift_symbol(grid, -shift))
    return values[::q].copy()


# ─────────────────────────────────────
# 4. EVEN-MODE BASIS
# ─────────────────────────────────────

def cosine_basis(grid: SpectralGrid, modes: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Columns cos(k_m z_j) for the given mode indices m ∈ [0, n/2], and their
    discrete squared norms (n for m = 0 and m = n/2, n/2 otherwise).
    """
    modes = np.asarray(modes, dtype=int)
    k = np.pi * modes / grid.half_width
    basis = np.cos(np.outer(grid.nodes, k))
    norms = np.where((modes == 0) | (modes == grid.n_points // 2), grid.n_points, grid.n_points / 2.0)
    return basis, norms


def cosine_coefficients(values: np.ndarray, basis: np.ndarray, norms: np.ndarray) -> np.ndarray:
    return (basis.T @ values) / norms


# ─────────────────────────────────────
# 5. NORMS
# ─────────────────────────────────────

def norms(f: Union[WaveProfile, np.ndarray, Sequence[float]], kind: str = "L2", s: float = 1.0) -> float:
    """
    l2 = √Σ|·|², sup = max|·|, L2 = √(h·Σ|·|²), Hs = spectral norm with weight (1+k²)^{s/2}.
    Bare sequences only support l2 and sup.
    """
    if isinstance(f, WaveProfile):
        values, grid = f.values, f.grid
    else:
        values, grid = np.asarray(f, dtype=float), None
    if values.size == 0:
        return 0.0
    if kind == "l2":
        return float(np.sqrt(np.sum(values * values)))
    if kind == "sup":
        return float(np.max(np.abs(values)))
    if grid is None:
        raise ValueError(f"norm '{kind}' needs a WaveProfile (grid spacing)")
    h = grid.spacing
    if kind == "L2":
        return float(np.sqrt(h * np.sum(values * values)))
    if kind in ("Hs", "H1"):
        if kind == "H1":
            s = 1.0
        spectrum = np.abs(np.fft.fft(values)) ** 2
        weight = (1.0 + grid.wavenumbers ** 2) ** s
        return float(np.sqrt(h * np.sum(weight * spectrum) / grid.n_points))
    raise ValueError(f"unknown norm kind '{kind}'")


def inner_product(f: WaveProfile, g: WaveProfile) -> float:
    """Discrete L² inner product h·Σ f g."""
    return float(f.grid.spacing * np.dot(f.values, g.values))


def profile_from_function(grid: SpectralGrid, fn, variable_tag: VariableTag = VariableTag.X_SCALE,
                          parity: Parity = Parity.NONE) -> WaveProfile:
    return WaveProfile(grid, fn(grid.nodes), variable_tag, parity)
