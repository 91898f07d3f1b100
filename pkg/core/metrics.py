"""
core/metrics.py
───────────────
All scaling statistics live here. Experiments do not fit or compare numbers
themselves; they call these functions and get back clean numbers, then
record them as verdicts on their ExperimentReport.

Statistics:
  1. Log-log slope             → least-squares slope of log y against log ε
  2. Scaled ratios             → y/ε^q and how much they grow as ε shrinks
  3. Monotonicity              → strictly increasing / decreasing sequences
  4. Gronwall envelopes        → smallest C with err(t) ≤ err(0)e^{Cε³t}, and
                                 𝒬(t) ≤ (𝒬(0) + Cε^{9/2}t)e^{Cε³t}
  5. Drift and growth rates    → relative drift of an invariant, exp. growth rate
  6. Verdict helpers           → at_most / at_least / in_window / close_to
"""

import math
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from core.models import ExperimentReport


# ─────────────────────────────────────
# 1. LOG-LOG SLOPE
# ─────────────────────────────────────

def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x (non-positive y are rejected)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 2 or np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("loglog_slope needs at least two positive points")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


# ─────────────────────────────────────
# 2. SCALED RATIOS
# ─────────────────────────────────────

def scaled_ratios(values: Sequence[float], epsilons: Sequence[float], exponent: float) -> np.ndarray:
    """values / ε^exponent, elementwise."""
    return np.asarray(values, dtype=float) / np.asarray(epsilons, dtype=float) ** exponent


def ratio_growth(ratios: Sequence[float], epsilons: Sequence[float]) -> float:
    """
    max ratio over the ratio at the largest ε.

    A bound y ≤ Cε^q holds with an ε-independent C exactly when this stays
    O(1) as ε shrinks; ratios that decay toward small ε give values ≤ 1.
    """
    r = np.asarray(ratios, dtype=float)
    eps = np.asarray(epsilons, dtype=float)
    anchor = r[int(np.argmax(eps))]
    if anchor <= 0.0:
        return math.inf
    return float(np.max(r) / anchor)


def ratio_spread(values: Sequence[float]) -> float:
    """max / min of positive values."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.min(v) <= 0.0:
        return math.inf
    return float(np.max(v) / np.min(v))


# ─────────────────────────────────────
# 3. MONOTONICITY
# ─────────────────────────────────────

def strictly_increasing(values: Sequence[float]) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) > 0.0))


def increasing_with(values: Sequence[float], keys: Sequence[float]) -> bool:
    """values strictly increase when sorted by keys (errors that shrink with ε)."""
    order = np.argsort(np.asarray(keys, dtype=float))
    return strictly_increasing(np.asarray(values, dtype=float)[order])


# ─────────────────────────────────────
# 4. GRONWALL ENVELOPES
# ─────────────────────────────────────

def gronwall_rate(times: Sequence[float], errors: Sequence[float], epsilon: float) -> float:
    """Smallest C ≥ 0 with err(t) ≤ err(0)·e^{Cε³t} at every t > 0."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(errors, dtype=float)
    if e[0] <= 0.0:
        return math.inf if np.any(e[1:] > 0.0) else 0.0
    later = t > 0.0
    if not np.any(later):
        return 0.0
    rates = np.log(np.maximum(e[later], 1e-300) / e[0]) / (epsilon ** 3 * t[later])
    return float(max(0.0, np.max(rates)))


def energy_envelope_constant(times: Sequence[float], q_values: Sequence[float], epsilon: float,
                             c_max: float = 1e8) -> float:
    """
    Smallest C ≥ 0 with 𝒬(t) ≤ (𝒬(0) + Cε^{9/2}t)·e^{Cε³t} at every checkpoint.

    The envelope increases with C, so the excess max_t(𝒬 − envelope) has one sign change.
    """
    t = np.asarray(times, dtype=float)
    q = np.asarray(q_values, dtype=float)
    q0, t0 = q[0], t[0]
    later = t > t0
    if not np.any(later):
        return 0.0
    t, q = t[later] - t0, q[later]

    def excess(c: float) -> float:
        envelope = (q0 + c * epsilon ** 4.5 * t) * np.exp(c * epsilon ** 3 * t)
        return float(np.max(q - envelope))

    if excess(0.0) <= 0.0:
        return 0.0
    upper = 1.0
    while excess(upper) > 0.0:
        upper *= 10.0
        if upper > c_max:
            return math.inf
    return float(brentq(excess, 0.0, upper, xtol=1e-12 * upper))


# ─────────────────────────────────────
# 5. DRIFT AND GROWTH
# ─────────────────────────────────────

def relative_drift(series: Sequence[float]) -> float:
    """max_t |x(t) − x(0)| / |x(0)| (absolute when x(0) = 0)."""
    s = np.asarray(series, dtype=float)
    scale = abs(s[0]) if s[0] != 0.0 else 1.0
    return float(np.max(np.abs(s - s[0])) / scale)


def exponential_growth_rate(times: Sequence[float], values: Sequence[float],
                            start_fraction: float = 0.5) -> float:
    """Least-squares slope of log(values) over the trailing part of the run."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (t >= t[0] + start_fraction * (t[-1] - t[0])) & (v > 0.0)
    if np.count_nonzero(keep) < 2:
        return 0.0
    slope, _ = np.polyfit(t[keep], np.log(v[keep]), 1)
    return float(slope)


def linear_speed(times: Sequence[float], positions: Sequence[float]) -> float:
    """Least-squares slope of position against time."""
    slope, _ = np.polyfit(np.asarray(times, dtype=float), np.asarray(positions, dtype=float), 1)
    return float(slope)


# ─────────────────────────────────────
# 6. VERDICT HELPERS
# ─────────────────────────────────────

def _finite(value: float) -> Optional[float]:
    return float(value) if value is not None and math.isfinite(value) else None


def at_most(report: ExperimentReport, criterion: str, measured: float, tolerance: float, note: str = "") -> bool:
    passed = math.isfinite(measured) and measured <= tolerance
    report.add_verdict(criterion, passed, _finite(measured), tolerance, note)
    return passed


def at_least(report: ExperimentReport, criterion: str, measured: float, tolerance: float, note: str = "") -> bool:
    passed = math.isfinite(measured) and measured >= tolerance
    report.add_verdict(criterion, passed, _finite(measured), tolerance, note)
    return passed


def in_window(report: ExperimentReport, criterion: str, measured: float, low: float, high: float) -> bool:
    passed = math.isfinite(measured) and low <= measured <= high
    report.add_verdict(criterion, passed, _finite(measured), high, note=f"window [{low:g}, {high:g}]")
    return passed


def close_to(report: ExperimentReport, criterion: str, measured: float, target: float, rel: float) -> bool:
    """|measured − target| ≤ rel·|target|; the recorded measure is the relative deviation."""
    deviation = abs(measured - target) / abs(target) if target != 0.0 else abs(measured)
    passed = math.isfinite(deviation) and deviation <= rel
    report.add_verdict(criterion, passed, _finite(deviation), rel, note=f"target {target:.6g}, got {measured:.6g}")
    return passed
