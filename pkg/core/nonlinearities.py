"""
core/nonlinearities.py
──────────────────────
Every scalar nonlinearity of the lattice and of its log-KdV limit.

  Ṽ_ε(w)   = ((1+w)^{2+ε²} − 1)/(2+ε²) − w      lattice potential
  Ṽ_ε′(w)  = (1+w)^{1+ε²} − 1 = w + N_ε(w)      lattice force
           = w + ε² g(w) + M_ε(w)
  g(W)     = (1+W) log(1+W)                      log-KdV flux with background
  v log|v|                                       log-KdV flux, zero background

plus the power family ½w² + ε²w^{p+1}/(p+1).

All powers (1+w)^a go through exp(a·log1p(w)), and N_ε, M_ε use their exact
factorizations, so nothing cancels catastrophically when |w| ≪ 1 or ε ≪ 1.
Functions accept scalars or numpy arrays and return the same shape.
Pure functions; safe from any thread.
"""

from typing import Union

import numpy as np

from core.exceptions import DomainError
from core.models import ModelParams, NonlinearityFamily

ArrayLike = Union[float, np.ndarray]

# series of expm1(s) − s and log1p(w) − w are used below this |s|, |w|
_SERIES_CUTOFF = 1e-2
# highest power kept in the log1p(w) − w series (remainder below 1e−16 relative at the cutoff)
_LOG_SERIES_ORDER = 11


def _check_domain(w: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(w, dtype=float)
    if np.any(arr <= -1.0) or np.any(np.isnan(arr)):
        raise DomainError(f"{name}: argument must be > -1 (min {np.nanmin(arr):.6g})")
    return arr


def _shape_like(result: np.ndarray, w: ArrayLike):
    return float(result) if np.ndim(w) == 0 else result


def _expm1_minus_identity(s: ArrayLike) -> np.ndarray:
    """e^s − 1 − s without cancellation for small |s|."""
    s = np.asarray(s, dtype=float)
    flat = np.atleast_1d(s).astype(float)
    out = np.expm1(flat) - flat
    small = np.abs(flat) < _SERIES_CUTOFF
    if np.any(small):
        x = flat[small]
        out[small] = x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0))))
    return out.reshape(s.shape)


def _log1p_minus_identity(w: np.ndarray) -> np.ndarray:
    """log(1+w) − w without cancellation for small |w|."""
    flat = np.atleast_1d(w).astype(float)
    out = np.log1p(flat) - flat
    small = np.abs(flat) < _SERIES_CUTOFF
    if np.any(small):
        x = flat[small]
        acc = np.zeros_like(x)
        for k in range(_LOG_SERIES_ORDER, 1, -1):
            acc = (-1.0) ** (k + 1) / k + x * acc
        out[small] = x * x * acc
    return out.reshape(np.shape(w))


# ─────────────────────────────────────
# 1. LATTICE FORCE AND POTENTIAL
# ─────────────────────────────────────

def force(w: ArrayLike, epsilon: float) -> ArrayLike:
    """Ṽ_ε′(w) = (1+w)^{1+ε²} − 1."""
    arr = _check_domain(w, "force")
    return _shape_like(np.expm1((1.0 + epsilon ** 2) * np.log1p(arr)), w)


def potential(w: ArrayLike, epsilon: float) -> ArrayLike:
    """Ṽ_ε(w) = ((1+w)^{2+ε²} − 1)/(2+ε²) − w, with Ṽ_ε(0) = 0."""
    arr = _check_domain(w, "potential")
    a = 2.0 + epsilon ** 2
    log1p_w = np.log1p(arr)
    # expm1(a·l)/a − w = (expm1(a·l) − a·l)/a + (l − w)
    value = _expm1_minus_identity(a * log1p_w) / a + _log1p_minus_identity(arr)
    return _shape_like(value, w)


def force_derivatives(w: ArrayLike, epsilon: float, order: int) -> ArrayLike:
    """Ṽ_ε″, Ṽ_ε‴ or Ṽ_ε⁗ for order 2, 3, 4."""
    arr = _check_domain(w, "force_derivatives")
    e2 = epsilon ** 2
    log1p_w = np.log1p(arr)
    if order == 2:
        value = (1.0 + e2) * np.exp(e2 * log1p_w)
    elif order == 3:
        value = e2 * (1.0 + e2) * np.exp((e2 - 1.0) * log1p_w)
    elif order == 4:
        value = e2 * (e2 - 1.0) * (1.0 + e2) * np.exp((e2 - 2.0) * log1p_w)
    else:
        raise ValueError(f"order must be 2, 3 or 4, got {order}")
    return _shape_like(value, w)


def n_epsilon(w: ArrayLike, epsilon: float) -> ArrayLike:
    """N_ε(w) = (1+w)·expm1(ε² log1p(w)), so that Ṽ_ε′(w) = w + N_ε(w)."""
    arr = _check_domain(w, "n_epsilon")
    return _shape_like((1.0 + arr) * np.expm1(epsilon ** 2 * np.log1p(arr)), w)


def n_epsilon_derivative(w: ArrayLike, epsilon: float) -> ArrayLike:
    """N_ε′(w) = Ṽ_ε″(w) − 1 = (1+ε²)·expm1(ε² log1p(w)) + ε²."""
    arr = _check_domain(w, "n_epsilon_derivative")
    e2 = epsilon ** 2
    return _shape_like((1.0 + e2) * np.expm1(e2 * np.log1p(arr)) + e2, w)


def m_epsilon(w: ArrayLike, epsilon: float) -> ArrayLike:
    """M_ε(w) = (1+w)(expm1(s) − s), s = ε² log1p(w); Ṽ_ε′ = w + ε²g + M_ε."""
    arr = _check_domain(w, "m_epsilon")
    s = epsilon ** 2 * np.log1p(arr)
    return _shape_like((1.0 + arr) * _expm1_minus_identity(s), w)


# ─────────────────────────────────────
# 2. LOG-KDV FLUXES
# ─────────────────────────────────────

def g_log(w: ArrayLike, order: int = 0) -> ArrayLike:
    """g(W) = (1+W) log(1+W) and its first two derivatives."""
    arr = _check_domain(w, "g_log")
    if order == 0:
        value = (1.0 + arr) * np.log1p(arr)
    elif order == 1:
        value = 1.0 + np.log1p(arr)
    elif order == 2:
        value = 1.0 / (1.0 + arr)
    else:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return _shape_like(value, w)


def vlogv(v: ArrayLike) -> ArrayLike:
    """v·log(v) for v ≥ 0, continuous at 0; subnormal inputs evaluate to 0."""
    arr = np.asarray(v, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError(f"vlogv: argument must be >= 0 (min {arr.min():.6g})")
    return _shape_like(vlogabsv(arr), v)


def vlogabsv(v: np.ndarray) -> np.ndarray:
    """v·log|v| with the continuous extension at 0; used inside the PDE flux."""
    arr = np.asarray(v, dtype=float)
    resolved = np.abs(arr) >= np.finfo(float).tiny
    safe = np.where(resolved, np.abs(arr), 1.0)
    return np.where(resolved, arr * np.log(safe), 0.0)


# ─────────────────────────────────────
# 3. POWER FAMILY
# ─────────────────────────────────────

def power_force(w: ArrayLike, epsilon: float, p: int) -> ArrayLike:
    """w + ε² w^p."""
    arr = np.asarray(w, dtype=float)
    return _shape_like(arr + epsilon ** 2 * arr ** p, w)


def power_potential(w: ArrayLike, epsilon: float, p: int) -> ArrayLike:
    """½w² + ε² w^{p+1}/(p+1)."""
    arr = np.asarray(w, dtype=float)
    return _shape_like(0.5 * arr ** 2 + epsilon ** 2 * arr ** (p + 1) / (p + 1), w)


def power_force_derivatives(w: ArrayLike, epsilon: float, p: int, order: int) -> ArrayLike:
    """Second to fourth derivative of the power potential."""
    arr = np.asarray(w, dtype=float)
    if order == 2:
        value = 1.0 + epsilon ** 2 * p * arr ** (p - 1)
    elif order == 3:
        value = epsilon ** 2 * p * (p - 1) * arr ** (p - 2)
    elif order == 4:
        if p < 3:
            value = np.zeros_like(arr)
        else:
            value = epsilon ** 2 * p * (p - 1) * (p - 2) * arr ** (p - 3)
    else:
        raise ValueError(f"order must be 2, 3 or 4, got {order}")
    return _shape_like(np.asarray(value, dtype=float), w)


def power_flux(w: ArrayLike, p: int, order: int = 0) -> ArrayLike:
    """W^p and its first two derivatives (KdV flux of the power family)."""
    arr = np.asarray(w, dtype=float)
    if order == 0:
        value = arr ** p
    elif order == 1:
        value = p * arr ** (p - 1)
    elif order == 2:
        value = p * (p - 1) * arr ** (p - 2)
    else:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return _shape_like(np.asarray(value, dtype=float), w)


# ─────────────────────────────────────
# 4. FAMILY DISPATCH
# ─────────────────────────────────────

def lattice_force(w: ArrayLike, params: ModelParams) -> ArrayLike:
    if params.family == NonlinearityFamily.POWER:
        return power_force(w, params.epsilon, params.power_exponent)
    return force(w, params.epsilon)


def lattice_potential(w: ArrayLike, params: ModelParams) -> ArrayLike:
    if params.family == NonlinearityFamily.POWER:
        return power_potential(w, params.epsilon, params.power_exponent)
    return potential(w, params.epsilon)


def lattice_force_derivative(w: ArrayLike, params: ModelParams, order: int) -> ArrayLike:
    if params.family == NonlinearityFamily.POWER:
        return power_force_derivatives(w, params.epsilon, params.power_exponent, order)
    return force_derivatives(w, params.epsilon, order)


def nonlinear_remainder(w: ArrayLike, params: ModelParams) -> ArrayLike:
    """Ṽ′(w) − w: N_ε for the Hertzian family, ε²w^p for the power family."""
    if params.family == NonlinearityFamily.POWER:
        arr = np.asarray(w, dtype=float)
        return _shape_like(params.epsilon ** 2 * arr ** params.power_exponent, w)
    return n_epsilon(w, params.epsilon)


def kdv_flux(w: ArrayLike, params: ModelParams, order: int = 0) -> ArrayLike:
    """The ε² coefficient of Ṽ′: g for the Hertzian family, W^p for the power family."""
    if params.family == NonlinearityFamily.POWER:
        return power_flux(w, params.power_exponent, order)
    return g_log(w, order)
