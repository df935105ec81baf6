"""
Stochastic Variational Wave Lab
Command-line entry point

Runs spectral Galerkin simulations of the stochastic variational wave
equation in Riemann-invariant form, and the studies that check its
estimates numerically:
- single trajectories and Monte Carlo moment ensembles
- noiseless energy identity and cut-off / limit equivalence
- mollifier commutators, difference bounds and shared-noise convergence
- Hoelder regularity in H^-3 and temporal continuity

Usage:
    python main.py simulate --config run.ini
    python main.py ensemble --config run.ini --workers 4 --paths 32
"""

import argparse
import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from svwave.logger import setup_logging, get_logger, log_exception
setup_logging()
logger = get_logger(__name__)

from svwave.config import apply_overrides, load_config
from svwave.errors import InvalidConfigurationError, SimulationError
from svwave.experiments import Subcommand, run


def _floats(text):
    return tuple(float(x) for x in text.replace(',', ' ').split())


def build_parser():
    """Argument parser for every subcommand"""
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Spectral Galerkin simulations of the stochastic variational wave equation",
    )
    parser.add_argument("subcommand", choices=[s.value for s in Subcommand], help="Experiment to run")
    parser.add_argument("--config", metavar="PATH", help="INI configuration file (defaults if omitted)")
    parser.add_argument("--seed", type=int, help="Master seed (unsigned 64-bit)")
    parser.add_argument("--workers", type=int, default=1, help="Worker processes (wall time only)")
    parser.add_argument("--output-dir", metavar="PATH", help="Directory for reports and CSVs")
    parser.add_argument("--modes", help="Initial modes as 'R terms; S terms', e.g. 'sin:1:0.5; sin:1:-0.5'")
    parser.add_argument("--dt", type=float, help="Step size")
    parser.add_argument("--nu", type=float, help="Viscosity")
    parser.add_argument("--paths", type=int, help="Number of study paths")
    parser.add_argument("--deltas", type=_floats, help="Mollifier widths, strictly decreasing")
    return parser


def main(argv=None):
    """Parse arguments, run the subcommand and return its exit status"""
    args = build_parser().parse_args(argv)
    logger.info(f"Command line: {args}")
    try:
        config = load_config(args.config)
        config = apply_overrides(
            config,
            seed=args.seed,
            output_dir=args.output_dir,
            dt=args.dt,
            nu=args.nu,
            paths=args.paths,
            deltas=args.deltas,
            modes=args.modes,
        )
    except InvalidConfigurationError as e:
        print("=" * 60)
        print("ERROR: Invalid configuration")
        print("=" * 60)
        for violation in e.violations:
            print(f"  - {violation}")
        return 2
    except OSError as e:
        log_exception(logger, e, "Could not read configuration")
        print(f"ERROR: {e}")
        return 2

    try:
        status = run(args.subcommand, config, workers=args.workers)
    except SimulationError as e:
        log_exception(logger, e, f"{args.subcommand} aborted")
        print(f"ERROR: {e}")
        return 1

    print(f"{args.subcommand}: {'PASS' if status == 0 else 'FAIL'} "
          f"(report in {os.path.join(config.output_dir, args.subcommand)})")
    return status


if __name__ == "__main__":
    sys.exit(main())
