"""
core/models.py
──────────────
All data types used across the lab.
Every solver and experiment reads/writes these types, and no ad-hoc dicts are used for
anything that crosses a module boundary.

Design rules:
  - Enums for any field that has a fixed set of values
  - Pydantic models for parameters, configuration and reports (validated, frozen)
  - Dataclasses for array-carrying containers (profiles, lattice states, results)
  - Array-carrying containers are immutable: their arrays are made read-only
  - No numerics here beyond what an invariant needs
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import grid_settings, run_settings


# ─────────────────────────────────────
# ENUMS
# ─────────────────────────────────────

class NonlinearityFamily(str, Enum):
    HERTZ_LOG = "hertz-log"          # Ṽ_ε(w) from the precompressed Hertzian contact
    POWER = "power"                  # ½w² + ε²w^{p+1}/(p+1)


class VariableTag(str, Enum):
    X_SCALE = "x-scale"              # long-wave variable of the stationary log-KdV wave
    Z_SCALE = "z-scale"              # lattice travelling-wave variable n − ct
    XI_SCALE = "xi-scale"            # ξ = ε(n − t) of the time-dependent log-KdV


class Parity(str, Enum):
    EVEN = "even"
    NONE = "none"


class OperatorKind(str, Enum):
    L_LAMBDA = "L_lambda"
    S_LAMBDA_SYM = "S_lambda_sym"
    S_LAMBDA_P_SYM = "S_lambda_p_sym"


class PdeNonlinearity(str, Enum):
    BACKGROUND_G = "background-g"    # (1+W) log(1+W)
    VLOGV = "vlogv"                  # v log|v|, zero background
    POWER = "power"                  # W^p


class PerturbationKind(str, Enum):
    GAUSSIAN = "gaussian"
    SINGLE_SITE = "single-site"
    PHASE_SHIFT = "phase-shift"


class Integrator(str, Enum):
    STRANG = "strang"
    YOSHIDA4 = "yoshida4"
    RK4 = "rk4"


class WaveSource(str, Enum):
    STATIONARY = "stationary"        # exact travelling solution W_stat(ξ − λτ/2)
    PDE_RUN = "pde-run"              # log-KdV solver output


class Subcommand(str, Enum):
    WAVE = "wave"
    SPECTRUM = "spectrum"
    SIMULATE = "simulate"
    PDE = "pde"
    JUSTIFY = "justify"
    STABILITY = "stability"
    RESIDUALS = "residuals"
    REPORT = "report"


# ─────────────────────────────────────
# MODEL PARAMETERS
# ─────────────────────────────────────

class ModelParams(BaseModel):
    """ε, λ and the a-priori bounds of one lattice model."""
    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    epsilon: float = 0.1             # α = 1 + ε²
    lam: float = Field(2.0, alias="lambda")   # μ = ε²λ, c² = 1 + μ
    v0: float = 1.0                  # precompression level
    cutoff_p: float = 2.0 / 3.0      # Fourier split |k| ≤ ε^p
    ball_R: float = 50.0
    ball_r: float = run_settings.guard_threshold
    family: NonlinearityFamily = NonlinearityFamily.HERTZ_LOG
    power_exponent: int = 2          # only read when family = power

    @field_validator("epsilon")
    @classmethod
    def epsilon_in_unit_interval(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {v}")
        return v

    @field_validator("lam")
    @classmethod
    def lambda_above_one(cls, v):
        if v <= 1.0:
            raise ValueError(f"lambda must be > 1, got {v}")
        return v

    @field_validator("v0", "ball_R")
    @classmethod
    def strictly_positive(cls, v):
        if v <= 0.0:
            raise ValueError(f"must be > 0, got {v}")
        return v

    @field_validator("cutoff_p")
    @classmethod
    def cutoff_in_window(cls, v):
        if not 5.0 / 8.0 < v < 6.0 / 8.0:
            raise ValueError(f"cutoff_p must lie in (5/8, 6/8), got {v}")
        return v

    @field_validator("ball_r")
    @classmethod
    def ball_r_window(cls, v):
        if not -1.0 < v < 0.0:
            raise ValueError(f"ball_r must lie in (-1, 0), got {v}")
        return v

    @model_validator(mode="after")
    def power_exponent_for_power_family(self):
        if self.family == NonlinearityFamily.POWER and self.power_exponent < 2:
            raise ValueError("power family needs power_exponent >= 2")
        return self

    @property
    def mu(self) -> float:
        return self.epsilon ** 2 * self.lam

    @property
    def speed(self) -> float:
        """Wave speed c with c² = 1 + ε²λ."""
        return math.sqrt(1.0 + self.mu)

    @property
    def cutoff(self) -> float:
        """Low/high split wavenumber ε^p on the z-scale."""
        return self.epsilon ** self.cutoff_p


# ─────────────────────────────────────
# GRIDS AND PROFILES
# ─────────────────────────────────────

class SpectralGrid(BaseModel):
    """Uniform periodic grid on [−L, L) with nodes −L + j·h."""
    model_config = ConfigDict(frozen=True)

    n_points: int
    half_width: float

    @field_validator("n_points")
    @classmethod
    def power_of_two(cls, v):
        if v < 16 or v & (v - 1):
            raise ValueError(f"n_points must be a power of two >= 16, got {v}")
        return v

    @field_validator("half_width")
    @classmethod
    def positive_width(cls, v):
        if v <= 0.0:
            raise ValueError("half_width must be > 0")
        return v

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        """πm/L in FFT order; index n/2 is the Nyquist mode."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    @property
    def nyquist(self) -> float:
        return np.pi / self.spacing


def reflect(values: np.ndarray) -> np.ndarray:
    """values(−z) on the periodic grid: node j maps to node (n − j) mod n."""
    return np.roll(values[::-1], 1)


@dataclass(frozen=True)
class WaveProfile:
    """A real function sampled on a SpectralGrid."""
    grid: SpectralGrid
    values: np.ndarray
    variable_tag: VariableTag = VariableTag.X_SCALE
    parity: Parity = Parity.NONE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"profile has {values.shape} values for a grid of {self.grid.n_points} points"
            )
        if self.parity == Parity.EVEN:
            values = 0.5 * (values + reflect(values))
        else:
            values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, parity: Optional[Parity] = None) -> "WaveProfile":
        return WaveProfile(self.grid, values, self.variable_tag, parity or self.parity)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes


# ─────────────────────────────────────
# LATTICE
# ─────────────────────────────────────

@dataclass(frozen=True)
class LatticeState:
    """Strain/momentum pair on a ring of N sites at time t."""
    w: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        p = np.array(self.p, dtype=float)
        if w.shape != p.shape or w.ndim != 1:
            raise ValueError("w and p must be 1-D arrays of the same length")
        w.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "p", p)

    @property
    def n_sites(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class EnergySplit:
    """H = H₀ + H₁ + H₂ + H_R around a travelling wave."""
    h0: float
    h1: float
    h2: float
    hr: float
    w_norm: float = 0.0              # ‖𝒲‖_{l²}
    p_norm: float = 0.0              # ‖𝒫‖_{l²}

    @property
    def total(self) -> float:
        return self.h0 + self.h1 + self.h2 + self.hr


# ─────────────────────────────────────
# REPORTS
# ─────────────────────────────────────

class Verdict(BaseModel):
    """One named acceptance criterion and how the run fared against it."""
    model_config = ConfigDict(populate_by_name=True)

    criterion: str
    passed: bool = Field(alias="pass")
    measured: Optional[float] = None
    tolerance: Optional[float] = None
    note: str = ""


class ExperimentReport(BaseModel):
    """Structured record of one experiment: numbers, fits, verdicts, provenance."""
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    verdicts: List[Verdict] = Field(default_factory=list)
    fitted_slopes: Dict[str, float] = Field(default_factory=dict)
    sup_ratios: Dict[str, float] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    curves: Dict[str, List[Dict[str, float]]] = Field(default_factory=dict, exclude=True)
    profiles: Dict[str, Any] = Field(default_factory=dict, exclude=True)    # name → WaveProfile
    curve_files: List[str] = Field(default_factory=list)
    seed: Optional[int] = None
    config_hash: str = ""

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add_verdict(self, criterion: str, passed: bool, measured: Optional[float] = None,
                    tolerance: Optional[float] = None, note: str = "") -> None:
        self.verdicts.append(Verdict(criterion=criterion, passed=bool(passed),
                                     measured=measured, tolerance=tolerance, note=note))


# ─────────────────────────────────────
# RUN CONFIGURATION
# ─────────────────────────────────────

class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI invocation."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    subcommand: Subcommand = Subcommand.WAVE
    model: ModelParams = Field(default_factory=ModelParams)

    # grid overrides (None → module default)
    x_points: Optional[int] = None
    x_half_width: Optional[float] = None
    pde_points: int = grid_settings.pde_points
    pde_half_width: float = grid_settings.pde_half_width
    ring_sites: Optional[int] = None

    # integrators
    integrator: Integrator = Integrator.YOSHIDA4
    dt: float = 0.05
    dtau: float = 5e-4
    t_end: float = 1000.0
    tau_end: float = 1.0
    checkpoint_every: float = 10.0

    # experiments
    delta: float = 1e-3
    tau0: float = 1.0
    tau1: float = 1.0
    epsilons: Tuple[float, ...] = (0.05, 0.1, 0.15, 0.2)
    lambdas: Tuple[float, ...] = (1.5, 2.0, 3.0)
    perturbation: PerturbationKind = PerturbationKind.GAUSSIAN
    source: WaveSource = WaveSource.STATIONARY
    pde_nonlinearity: PdeNonlinearity = PdeNonlinearity.BACKGROUND_G
    trials: int = 100
    power_exponents: Tuple[int, ...] = (2, 3, 4, 5, 6)
    pair_epsilons: Tuple[float, ...] = (0.1, 0.141)
    residual_epsilons: Tuple[float, ...] = (0.05, 0.0707, 0.1, 0.141, 0.2)
    error_ceiling: float = 10.0     # C₀ of the stability bound err ≤ C₀δ
    sweep: bool = False             # wave: add the ε-sweep and the trivial-solution check
    long_run: bool = False
    seed: int = run_settings.default_seed

    # output
    out_dir: str = run_settings.results_dir
    report_dir: Optional[str] = None
    workers: int = run_settings.workers
    svg: bool = False

    @field_validator("dt", "dtau", "t_end", "tau_end", "checkpoint_every", "tau0", "tau1", "error_ceiling")
    @classmethod
    def positive_times(cls, v):
        if v <= 0.0:
            raise ValueError(f"must be > 0, got {v}")
        return v

    @field_validator("delta")
    @classmethod
    def non_negative_delta(cls, v):
        if v < 0.0:
            raise ValueError(f"delta must be >= 0, got {v}")
        return v

    @field_validator("epsilons", "pair_epsilons", "residual_epsilons")
    @classmethod
    def epsilons_supported(cls, v):
        if not v:
            raise ValueError("epsilons must not be empty")
        for eps in v:
            if not 0.02 <= eps <= 0.25:
                raise ValueError(f"epsilon {eps} outside the supported range [0.02, 0.25]")
        return v

    @field_validator("lambdas")
    @classmethod
    def lambdas_above_one(cls, v):
        if any(lam <= 1.0 for lam in v):
            raise ValueError("every lambda must be > 1")
        return v

    @field_validator("power_exponents")
    @classmethod
    def exponents_at_least_two(cls, v):
        if any(p < 2 for p in v):
            raise ValueError("power exponents must be >= 2")
        return v

    @field_validator("x_points", "ring_sites", "pde_points")
    @classmethod
    def optional_power_of_two(cls, v):
        if v is not None and (v < 16 or v & (v - 1)):
            raise ValueError(f"must be a power of two >= 16, got {v}")
        return v

    @field_validator("workers", "trials")
    @classmethod
    def at_least_one(cls, v):
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @model_validator(mode="after")
    def model_epsilon_supported(self):
        if self.subcommand != Subcommand.REPORT and not 0.02 <= self.model.epsilon <= 0.25:
            raise ValueError(
                f"model.epsilon {self.model.epsilon} outside the supported range [0.02, 0.25]"
            )
        if self.subcommand == Subcommand.REPORT and not self.report_dir:
            raise ValueError("report needs --dir")
        return self
