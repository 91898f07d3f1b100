"""
utils/perturbations.py
──────────────────────
Seeded random data for the stability and small-solution experiments.

All randomness in the lab comes from one counter-based bit generator
(numpy Philox) keyed by the run seed, so a (seed, config) pair always
reproduces the same perturbations on any platform numpy supports.

Perturbation classes for the stability runs:
  gaussian   : i.i.d. normal (𝒲, 𝒫) on every site, rescaled to l² size δ
  single-site: all of δ on the strain of the site nearest the wave crest
  phase-shift: the wave itself translated by a fraction of a site,
                 (w_stat(n − s), p_stat(n − s)) − (w_stat(n), p_stat(n)),
                 with s chosen so that the l² size is δ
"""

import logging
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from core.models import PerturbationKind, SpectralGrid, WaveProfile
from utils.spectral import ring_sample

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _rescale(dw: np.ndarray, dp: np.ndarray, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    size = float(np.sqrt(np.sum(dw ** 2) + np.sum(dp ** 2)))
    if size == 0.0:
        return dw, dp
    return dw * (delta / size), dp * (delta / size)


def gaussian_perturbation(n_sites: int, delta: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = make_rng(seed)
    return _rescale(rng.standard_normal(n_sites), rng.standard_normal(n_sites), delta)


def single_site_perturbation(n_sites: int, delta: float, site: int) -> Tuple[np.ndarray, np.ndarray]:
    dw = np.zeros(n_sites)
    dw[site % n_sites] = delta
    return dw, np.zeros(n_sites)


def phase_shift_perturbation(strain: WaveProfile, momentum: WaveProfile, n_sites: int,
                             delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Translate the ring-sampled wave by the shift s ∈ (0, 1] whose difference has l² size δ."""
    w0 = ring_sample(strain, n_sites)
    p0 = ring_sample(momentum, n_sites)

    def size(shift: float) -> float:
        dw = ring_sample(strain, n_sites, shift) - w0
        dp = ring_sample(momentum, n_sites, shift) - p0
        return float(np.sqrt(np.sum(dw ** 2) + np.sum(dp ** 2)))

    if delta == 0.0:
        return np.zeros(n_sites), np.zeros(n_sites)
    upper = 1.0
    if size(upper) < delta:
        logger.warning(f"phase shift of one site only reaches l2 size {size(upper):.3e} < {delta:.3e}")
        shift = upper
    else:
        shift = brentq(lambda s: size(s) - delta, 1e-12, upper, xtol=1e-15)
    return (ring_sample(strain, n_sites, shift) - w0, ring_sample(momentum, n_sites, shift) - p0)


def make_perturbation(kind: PerturbationKind, strain: WaveProfile, momentum: WaveProfile,
                      n_sites: int, delta: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """(𝒲(0), 𝒫(0)) with ‖𝒲‖²_{l²} + ‖𝒫‖²_{l²} = δ²."""
    if kind == PerturbationKind.GAUSSIAN:
        return gaussian_perturbation(n_sites, delta, seed)
    if kind == PerturbationKind.SINGLE_SITE:
        crest = int(np.argmax(ring_sample(strain, n_sites)))
        return single_site_perturbation(n_sites, delta, crest)
    if kind == PerturbationKind.PHASE_SHIFT:
        return phase_shift_perturbation(strain, momentum, n_sites, delta)
    raise ValueError(f"unknown perturbation kind {kind}")


def random_even_localized(grid: SpectralGrid, radius: float, rng: np.random.Generator,
                          width: float = 4.0) -> np.ndarray:
    """
    Non-negative even data with max(‖·‖_{L²}, ‖·‖_sup) = radius: a random
    combination of even Gaussian bumps e^{−(z ± a)²/(2s²)} inside |z| ≤ 4·width.
    """
    z = grid.nodes
    values = np.zeros(grid.n_points)
    for _ in range(3):
        a = rng.uniform(0.0, 3.0 * width)
        s = rng.uniform(0.5, 1.0) * width
        weight = rng.uniform(0.2, 1.0)
        values += weight * (np.exp(-0.5 * ((z - a) / s) ** 2) + np.exp(-0.5 * ((z + a) / s) ** 2))
    l2 = float(np.sqrt(grid.spacing * np.sum(values ** 2)))
    sup = float(np.max(values))
    return values * (radius / max(l2, sup))
