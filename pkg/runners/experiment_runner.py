"""
runners/experiment_runner.py
────────────────────────────
The run pipeline behind every compute subcommand:

  prepare → compute ─┬─ judge ─┬─ persist → END
                     └─ abort ─┘

compute maps the subcommand onto the harness experiments; judge turns the
verdicts into an exit code; abort keeps whatever partial reports exist and
marks the run directory; persist writes all artifacts.
"""

import logging
from typing import Callable, Dict, List, Optional

from langgraph.graph import END, StateGraph
from typing_extensions import TypedDict

from core.exceptions import ExperimentAborted, LabError
from core.models import ExperimentReport, RunConfig, Subcommand
from experiments.justification_harness import (
    run_pde, run_power_long_run, run_residual_scaling, run_sampling_check, run_simulation, run_small_solution_check,
    run_spectrum, run_stationary_checks, run_theorem1_sweep, run_theorem2_stability, run_theorem3_justification,
    run_travelling_wave,
)
from utils.report_generator import ReportGenerator

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_COMPUTE = 3


# ─────────────────────────────────────
# STATE
# ─────────────────────────────────────

class RunnerState(TypedDict):
    config: RunConfig
    generator: Optional[ReportGenerator]
    reports: List[ExperimentReport]
    error: Optional[str]
    exit_code: int
    run_dir: str


# ─────────────────────────────────────
# SUBCOMMAND → EXPERIMENTS
# ─────────────────────────────────────

def _wave(cfg: RunConfig) -> List[Callable[[], ExperimentReport]]:
    jobs = [lambda: run_travelling_wave(cfg.model)]
    if cfg.sweep:
        jobs += [
            lambda: run_stationary_checks(cfg.lambdas, cfg.x_points, cfg.x_half_width),
            lambda: run_theorem1_sweep(cfg.model.lam, cfg.epsilons, base=cfg.model, workers=cfg.workers),
            lambda: run_small_solution_check(seed=cfg.seed),
        ]
    return jobs


def _spectrum(cfg: RunConfig) -> List[Callable[[], ExperimentReport]]:
    return [lambda: run_spectrum(cfg.lambdas, cutoff_p=cfg.model.cutoff_p, trials=cfg.trials, seed=cfg.seed,
                                 workers=cfg.workers, x_points=cfg.x_points, x_half_width=cfg.x_half_width)]


def _simulate(cfg: RunConfig) -> List[Callable[[], ExperimentReport]]:
    return [lambda: run_simulation(cfg.model, cfg.t_end, cfg.dt, cfg.integrator, cfg.checkpoint_every, cfg.delta,
                                   cfg.perturbation, cfg.seed, cfg.ring_sites)]


def _stability(cfg: RunConfig) -> List[Callable[[], ExperimentReport]]:
    return [lambda: run_theorem2_stability(cfg.model, cfg.delta, cfg.tau0, cfg.perturbation, cfg.seed, cfg.dt,
                                           cfg.integrator, cfg.checkpoint_every, cfg.error_ceiling,
                                           ring_override=cfg.ring_sites, workers=cfg.workers)]


def _justify(cfg: RunConfig) -> List[Callable[[], ExperimentReport]]:
    jobs = [lambda: run_theorem3_justification(cfg.model, cfg.pair_epsilons, cfg.tau1, cfg.source, cfg.dt,
                                               cfg.integrator, cfg.checkpoint_every, cfg.dtau, cfg.pde_half_width,
                                               ring_override=cfg.ring_sites, workers=cfg.workers)]
    if cfg.long_run:
        jobs.append(lambda: run_power_long_run(cfg.model, cfg.power_exponents, cfg.tau1, cfg.dt, cfg.integrator,
                                               cfg.checkpoint_every, workers=cfg.workers))
    return jobs


def _residuals(cfg: RunConfig) -> List[Callable[[], ExperimentReport]]:
    return [lambda: run_residual_scaling(cfg.model, cfg.residual_epsilons, workers=cfg.workers),
            lambda: run_sampling_check()]


def _pde(cfg: RunConfig) -> List[Callable[[], ExperimentReport]]:
    return [lambda: run_pde(cfg.model.lam, cfg.pde_nonlinearity, cfg.tau_end, cfg.dtau, cfg.pde_points,
                            cfg.pde_half_width, cfg.model.power_exponent)]


EXPERIMENTS: Dict[Subcommand, Callable[[RunConfig], List[Callable[[], ExperimentReport]]]] = {
    Subcommand.WAVE: _wave,
    Subcommand.SPECTRUM: _spectrum,
    Subcommand.SIMULATE: _simulate,
    Subcommand.STABILITY: _stability,
    Subcommand.JUSTIFY: _justify,
    Subcommand.RESIDUALS: _residuals,
    Subcommand.PDE: _pde,
}


# ─────────────────────────────────────
# NODES
# ─────────────────────────────────────

def prepare(state: RunnerState) -> RunnerState:
    cfg = state["config"]
    if cfg.subcommand not in EXPERIMENTS:
        raise ValueError(f"{cfg.subcommand.value} has no compute pipeline")
    generator = state["generator"] or ReportGenerator(cfg)
    logger.info(f"run {cfg.subcommand.value}: epsilon={cfg.model.epsilon}, lambda={cfg.model.lam}, "
                f"seed={cfg.seed} -> {generator.run_dir}")
    state["generator"] = generator
    state["run_dir"] = generator.run_dir
    return state


def compute(state: RunnerState) -> RunnerState:
    cfg = state["config"]
    for job in EXPERIMENTS[cfg.subcommand](cfg):
        try:
            report = job()
        except ExperimentAborted as exc:
            if exc.report is not None:
                state["reports"].append(exc.report)
            state["error"] = str(exc)
            logger.error(f"aborted: {exc}")
            return state
        except LabError as exc:
            state["error"] = f"{type(exc).__name__}: {exc}"
            logger.error(f"compute error: {state['error']}")
            return state
        except Exception as exc:
            # numpy/scipy errors (LinAlgError, brentq sign checks) count as compute errors
            state["error"] = f"{type(exc).__name__}: {exc}"
            logger.error(f"unexpected compute error: {state['error']}", exc_info=True)
            return state
        failed = [v.criterion for v in report.verdicts if not v.passed]
        logger.info(f"{report.name}: {len(report.verdicts) - len(failed)}/{len(report.verdicts)} verdicts pass"
                    + (f" (failed: {', '.join(failed)})" if failed else ""))
        state["reports"].append(report)
    return state


def route_after_compute(state: RunnerState) -> str:
    return "abort" if state["error"] else "judge"


def judge(state: RunnerState) -> RunnerState:
    state["exit_code"] = EXIT_PASS if all(r.all_passed for r in state["reports"]) else EXIT_FAIL
    return state


def abort(state: RunnerState) -> RunnerState:
    state["exit_code"] = EXIT_COMPUTE
    return state


def persist(state: RunnerState) -> RunnerState:
    generator = state["generator"]
    for report in state["reports"]:
        report.seed = report.seed if report.seed is not None else state["config"].seed
        generator.save_report(report)
    generator.write_summary(state["reports"], aborted=state["error"])
    return state


# ─────────────────────────────────────
# BUILD GRAPH
# ─────────────────────────────────────

def build_runner_graph() -> StateGraph:
    """Build the LangGraph of one experiment run."""
    graph = StateGraph(RunnerState)

    graph.add_node("prepare", prepare)
    graph.add_node("compute", compute)
    graph.add_node("judge", judge)
    graph.add_node("abort", abort)
    graph.add_node("persist", persist)

    graph.add_edge("prepare", "compute")
    graph.add_conditional_edges("compute", route_after_compute, {"judge": "judge", "abort": "abort"})
    graph.add_edge("judge", "persist")
    graph.add_edge("abort", "persist")
    graph.add_edge("persist", END)

    graph.set_entry_point("prepare")

    return graph


# ─────────────────────────────────────
# PUBLIC INTERFACE
# ─────────────────────────────────────

class ExperimentRunner:
    """Runs one resolved configuration end to end and reports its exit code."""

    def __init__(self):
        self.graph = build_runner_graph().compile()

    def execute(self, config: RunConfig, generator: Optional[ReportGenerator] = None) -> Dict:
        """
        Run the experiments of `config.subcommand` and persist their artifacts.
        Returns the exit code, the run directory and the reports.
        """
        initial_state: RunnerState = {
            "config": config,
            "generator": generator,
            "reports": [],
            "error": None,
            "exit_code": EXIT_PASS,
            "run_dir": "",
        }

        result = self.graph.invoke(initial_state)

        return {
            "exit_code": result["exit_code"],
            "run_dir": result["run_dir"],
            "reports": result["reports"],
            "error": result["error"],
        }
