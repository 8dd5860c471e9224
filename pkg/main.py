"""
HMC Lab - Main Application

Benchmarks and closed-form analysis of idealized Hamiltonian Monte Carlo
samplers, plus a REST service over the analysis.
"""

import argparse
import logging
import sys

import numpy as np

from hmclab import ResultsDatabase, create_api
from hmclab.bench import COMMANDS, load_bench_config, run_command
from hmclab.config import get_config
from hmclab.errors import LabError
from hmclab.report import FORMATS, write_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

COMMAND_HELP = {
    'sample': 'Run every algorithm over independent chains and report per-chain diagnostics',
    'table1': 'Averaged ESS and covariance error on diag(1, ..., d)',
    'scaling': 'Predicted iterations and total time against the condition number',
    'integrators': 'Bias and fitted order of the integrators against the stepsize',
    'certificates': 'Certified contraction rates from the Lyapunov search',
    'inequalities': 'Margins of the coupled-flow contraction inequalities',
}


def run_api_server(host=None, port=None):
    """Run the REST API server."""
    config = get_config()
    host = host or config['API_HOST']
    port = port or config['API_PORT']
    logger.info(f"Starting API server on {host}:{port}")
    logger.info(f"Using database at {config['DB_PATH']}")

    api = create_api(config['DB_PATH'])
    api.run(host=host, port=port, debug=config['DEBUG'])


def run_benchmark(args, app_config) -> int:
    """Resolve the config, run one command, write its report; returns the exit code."""
    defaults = {
        'grid_points': app_config['GRID_POINTS'],
        'cert_grid_points': app_config['CERT_GRID_POINTS'],
        'ess_method': app_config['ESS_METHOD'],
        'ess_max_lag': app_config['ESS_MAX_LAG'],
        'workers': app_config['WORKERS'],
    }
    overrides = {'seed': args.seed, 'out': args.out, 'format': args.format, 'check': args.check}
    try:
        config = load_bench_config(args.config, args.command, overrides, defaults)
        result = run_command(config)
    except LabError as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    checks = [c.to_dict() for c in result.checks]
    write_report(result.rows, config.to_dict(), config.out, config.format, checks)
    if result.arrays and config.out:
        np.savez(f"{config.out}.positions.npz", **result.arrays)
        logger.info(f"Wrote {len(result.arrays)} position arrays to {config.out}.positions.npz")

    if args.store or app_config['STORE_RESULTS']:
        store = ResultsDatabase(app_config['DB_PATH'])
        run_id = store.save_run(config.command, config.to_dict(), result.rows,
                                result.passed if config.check else None)
        store.close()
        if run_id is not None:
            logger.info(f"Stored {config.command} run {run_id} in {app_config['DB_PATH']}")

    if config.check and not result.passed:
        failed = [c.name for c in result.checks if not c.passed]
        print(f"FAILED checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(description='HMC Lab: idealized HMC samplers')
    parser.add_argument('--log-level', help='Override LOG_LEVEL (DEBUG, INFO, WARNING, ...)')
    subparsers = parser.add_subparsers(dest='command')

    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=COMMAND_HELP[name])
        sub.add_argument('--config', help='JSON benchmark configuration')
        sub.add_argument('--seed', type=int, help='Base seed; chain c uses seed + c')
        sub.add_argument('--out', help='Output path (stdout when omitted)')
        sub.add_argument('--format', choices=FORMATS, help='Output format')
        sub.add_argument('--check', action='store_const', const=True,
                         help='Evaluate the acceptance thresholds and fail on violation')
        sub.add_argument('--store', action='store_true', help='Save the run to the results database')

    serve = subparsers.add_parser('serve', help='Run the REST API server')
    serve.add_argument('--host')
    serve.add_argument('--port', type=int)
    return parser


def main(argv=None) -> int:
    """Main entry point with command line argument parsing."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        app_config = get_config()
    except LabError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.log_level:
        logging.getLogger().setLevel(args.log_level.upper())

    if args.command in COMMANDS:
        return run_benchmark(args, app_config)
    # Default to API server
    run_api_server(getattr(args, 'host', None), getattr(args, 'port', None))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
