"""
lab.py
──────
Command-line entry point.

  python lab.py wave --epsilon 0.1 --lambda 2
  python lab.py justify --config runs/theorem3.toml --workers 2
  python lab.py report --dir results/<run-id>

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 invalid configuration,
3 compute error (partial artifacts kept, run directory marked ABORTED).
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from config.settings import configure_logging
from core.exceptions import ConfigError
from core.models import Integrator, NonlinearityFamily, PdeNonlinearity, PerturbationKind, Subcommand, WaveSource
from runners.experiment_runner import EXIT_COMPUTE, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, ExperimentRunner
from utils.data_validator import parse_and_validate
from utils.report_generator import load_summary, verdict_table

logger = logging.getLogger("lab")


def _add_global_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--out", help="parent directory of run directories")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--lambda", dest="lam", type=float)
    parser.add_argument("--cutoff-p", dest="cutoff_p", type=float)
    parser.add_argument("--family", choices=[f.value for f in NonlinearityFamily])
    parser.add_argument("--power-exponent", dest="power_exponent", type=int)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x-points", dest="x_points", type=int)
    parser.add_argument("--x-half-width", dest="x_half_width", type=float)
    parser.add_argument("--ring-sites", dest="ring_sites", type=int)
    parser.add_argument("--pde-points", dest="pde_points", type=int)
    parser.add_argument("--pde-half-width", dest="pde_half_width", type=float)
    parser.add_argument("--integrator", choices=[i.value for i in Integrator])
    parser.add_argument("--dt", type=float)
    parser.add_argument("--dtau", type=float)
    parser.add_argument("--t-end", dest="t_end", type=float)
    parser.add_argument("--tau-end", dest="tau_end", type=float)
    parser.add_argument("--checkpoint-every", dest="checkpoint_every", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--tau0", type=float)
    parser.add_argument("--tau1", type=float)
    parser.add_argument("--epsilons", type=float, nargs="+")
    parser.add_argument("--pair-epsilons", dest="pair_epsilons", type=float, nargs="+")
    parser.add_argument("--residual-epsilons", dest="residual_epsilons", type=float, nargs="+")
    parser.add_argument("--lambdas", type=float, nargs="+")
    parser.add_argument("--perturbation", choices=[p.value for p in PerturbationKind])
    parser.add_argument("--source", choices=[s.value for s in WaveSource])
    parser.add_argument("--nonlinearity", choices=[n.value for n in PdeNonlinearity])
    parser.add_argument("--trials", type=int)
    parser.add_argument("--power-exponents", dest="power_exponents", type=int, nargs="+")
    parser.add_argument("--error-ceiling", dest="error_ceiling", type=float)
    parser.add_argument("--sweep", action="store_true", default=None,
                        help="wave: add the epsilon sweep and the trivial-solution check")
    parser.add_argument("--long-run", dest="long_run", action="store_true", default=None,
                        help="justify: add the power-family long run")
    parser.add_argument("--svg", action="store_true", default=None, help="also write SVG charts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description="Precompressed Hertzian lattice experiments")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for subcommand in Subcommand:
        child = sub.add_parser(subcommand.value)
        _add_global_flags(child)
        if subcommand == Subcommand.REPORT:
            child.add_argument("--dir", required=True, help="run directory to summarize")
            continue
        _add_model_flags(child)
        _add_run_flags(child)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging("DEBUG" if args.verbose else None)

    try:
        config = parse_and_validate(args)
    except ConfigError as exc:
        print(f"configuration error ({exc.key or 'config'}): {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.print_config:
        print(json.dumps(config.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True))
        return EXIT_PASS

    if config.subcommand == Subcommand.REPORT:
        try:
            summary = load_summary(config.report_dir)
        except ConfigError as exc:
            print(f"report refused ({exc.key}): {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(verdict_table(summary))
        if summary.get("aborted"):
            return EXIT_COMPUTE
        return EXIT_PASS if summary.get("all_passed") else EXIT_FAIL

    outcome = ExperimentRunner().execute(config)
    logger.info(f"artifacts in {outcome['run_dir']} (exit {outcome['exit_code']})")
    return outcome["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
