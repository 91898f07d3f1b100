"""
config/settings.py
─────────────────
Numerical and run defaults for the lab.
Loaded once at import time from environment variables (and a local .env).
Modules import the singletons below and never read .env themselves.

Per-run choices (ε, λ, seeds, step sizes) live in RunConfig (core/models.py);
this file holds the numerical defaults those runs fall back on.
"""

import logging
import os
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, field_validator

# Load .env file into environment
load_dotenv()


class SolverSettings(BaseModel):
    """Tolerances and iteration caps shared by every solver."""
    inner_tol: float = float(os.getenv("LAB_INNER_TOL", "1e-12"))
    outer_tol: float = float(os.getenv("LAB_OUTER_TOL", "1e-10"))
    inner_max_iter: int = int(os.getenv("LAB_INNER_MAX_ITER", "200"))
    outer_max_iter: int = int(os.getenv("LAB_OUTER_MAX_ITER", "50"))
    damping_halvings: int = int(os.getenv("LAB_DAMPING_HALVINGS", "8"))
    gmres_restart: int = int(os.getenv("LAB_GMRES_RESTART", "60"))
    ode_rtol: float = float(os.getenv("LAB_ODE_RTOL", "1e-12"))
    tail_threshold: float = float(os.getenv("LAB_TAIL_THRESHOLD", "1e-13"))
    stationary_residual_tol: float = float(os.getenv("LAB_STATIONARY_RESIDUAL_TOL", "1e-7"))
    fixed_point_residual_tol: float = float(os.getenv("LAB_FIXED_POINT_RESIDUAL_TOL", "1e-10"))
    nyquist_energy_warn: float = float(os.getenv("LAB_NYQUIST_ENERGY_WARN", "1e-10"))

    @field_validator("inner_tol", "outer_tol", "ode_rtol", "tail_threshold")
    @classmethod
    def must_be_positive(cls, v):
        if v <= 0:
            raise ValueError("tolerances must be positive")
        return v


class GridSettings(BaseModel):
    """Default discretizations."""
    x_points: int = int(os.getenv("LAB_X_POINTS", "2048"))
    x_min_half_width: float = float(os.getenv("LAB_X_MIN_HALF_WIDTH", "20"))
    z_max_spacing: float = float(os.getenv("LAB_Z_MAX_SPACING", "0.25"))
    z_min_half_width: float = float(os.getenv("LAB_Z_MIN_HALF_WIDTH", "50"))
    pde_points: int = int(os.getenv("LAB_PDE_POINTS", "2048"))
    pde_half_width: float = float(os.getenv("LAB_PDE_HALF_WIDTH", "20"))
    ring_min_sites: int = int(os.getenv("LAB_RING_MIN_SITES", "4096"))
    oversampling: int = int(os.getenv("LAB_OVERSAMPLING", "4"))


class RunSettings(BaseModel):
    """Where results go and how runs are scheduled."""
    results_dir: str = os.getenv("LAB_RESULTS_DIR", "results")
    workers: int = int(os.getenv("LAB_WORKERS", "1"))
    default_seed: int = int(os.getenv("LAB_SEED", "42"))
    guard_threshold: float = float(os.getenv("LAB_GUARD_THRESHOLD", "-0.95"))
    csv_float_format: str = os.getenv("LAB_CSV_FLOAT_FORMAT", "%.16e")
    log_level: str = os.getenv("LAB_LOG_LEVEL", "INFO")

    @field_validator("workers")
    @classmethod
    def at_least_one_worker(cls, v):
        if v < 1:
            raise ValueError("workers must be >= 1")
        return v


# ─── Singleton instances (import these everywhere) ───
solver_settings = SolverSettings()
grid_settings = GridSettings()
run_settings = RunSettings()


def configure_logging(level: Optional[str] = None) -> None:
    """Install the `[module] message` console format once per process."""
    logging.basicConfig(
        level=getattr(logging, (level or run_settings.log_level).upper(), logging.INFO),
        format="[%(name)s] %(message)s",
    )
