"""Main entry point for the hierarchical deconvolution toolkit"""
import argparse
import logging
import sys

from src.errors import ConfigError, DiagnosticFailure, HypothesisError, NumericalError
from src.experiment import ExperimentConfig
from src.pipeline import cmd_diagnose, cmd_estimate, cmd_report, cmd_synthesize
from config import DIAG_SELECTORS, EXIT_CODES

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """Command-line parser: global options, then one subcommand per pipeline stage."""
    parser = argparse.ArgumentParser(
        description='Edge-preserving Bayesian deconvolution on the circle with a hierarchical prior')
    parser.add_argument('--config', default=None, help='Path to the experiment config (JSON)')
    parser.add_argument('--out', default=None, help='Output directory (overrides out_dir)')
    parser.add_argument('--seed', type=int, default=None, help='Random seed (overrides seed)')
    parser.add_argument('--print-config', action='store_true', help='Print the resolved config and exit')
    parser.add_argument('--verify', action='store_true', help='Cross-check synthesized data against the truth')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--quiet', '-q', action='store_true', help='Warnings only, no progress bar')

    sub = parser.add_subparsers(dest='command')
    sub.add_parser('synthesize', help='Generate a truth signal and a noisy measurement')
    est = sub.add_parser('estimate', help='Sample the posterior for a measurement')
    est.add_argument('measurement', help='Measurement JSON written by synthesize')
    diag = sub.add_parser('diagnose', help='Run the level-sweep diagnostics')
    diag.add_argument('selector', nargs='?', default='all', choices=DIAG_SELECTORS)
    rep = sub.add_parser('report', help='Collect run reports into the run table')
    rep.add_argument('reports', nargs='+', help='Run-report JSON files written by estimate')
    return parser


def setup_logging(verbose: bool, quiet: bool) -> None:
    """Root logging at DEBUG (--verbose), WARNING (--quiet) or INFO."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(module)s.%(funcName)s - %(levelname)s - %(message)s",
    )


def run(args: argparse.Namespace) -> int:
    """Dispatch a parsed command line; returns the exit code for a successful run."""
    config = ExperimentConfig.resolve(args.config, {'out_dir': args.out, 'seed': args.seed})
    if args.print_config:
        print(config.to_json())
        return EXIT_CODES['ok']

    if args.command == 'synthesize':
        paths = cmd_synthesize(config, verify=args.verify)
        print(f"\n=== Synthesized ===")
        for name, path in paths.items():
            print(f"{name}: {path}")

    elif args.command == 'estimate':
        report, paths = cmd_estimate(config, args.measurement, progress=not args.quiet)
        print(f"\n=== Run Report ===")
        print(f"N: {report.N}")
        print(f"epsilon: {report.epsilon:g}")
        print(f"Samples (L - l0): {report.samples_used:,}")
        print(f"Acceptance r: {report.acceptance_ratio:.3f}")
        print(f"Time: {report.wall_time_s:.1f}s")
        print(f"max|v_cm - 1|: {report.v_dip:.4f}")
        for name, path in paths.items():
            print(f"{name}: {path}")

    elif args.command == 'diagnose':
        results, paths = cmd_diagnose(config, args.selector)
        print(f"\n=== Diagnostics ({args.selector}) ===")
        for r in results:
            print(f"{r.name}: {'PASS' if r.passed else 'FAIL'}{' (flagged)' if r.flagged else ''}")
        print(f"Results: {paths['json']}")

    elif args.command == 'report':
        paths = cmd_report(args.reports, config.out_dir)
        print(f"\n=== Run Table ===")
        for name, path in paths.items():
            print(f"{name}: {path}")

    else:
        print("No command given; see --help", file=sys.stderr)
        return EXIT_CODES['config']
    return EXIT_CODES['ok']


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        return run(args)
    except (ConfigError, HypothesisError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CODES['config']
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_CODES['numeric']
    except DiagnosticFailure as e:
        logger.error(str(e))
        return EXIT_CODES['diagnostic']
    except (ValueError, OSError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CODES['config']


if __name__ == '__main__':
    sys.exit(main())
