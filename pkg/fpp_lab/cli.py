"""
Command line for the lab.

Usage:
    fpp-lab run --config <file> --out <dir> [--threads N] [--strict]
    fpp-lab merge <dir>... --out <dir>
    fpp-lab validate --config <file>

Exit codes:
    0 - Success
    1 - The experiment failed
    2 - Invalid configuration
    3 - Censored fraction over the threshold (run --strict)
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from fpp_lab import __version__, experiments
from fpp_lab.config import ExperimentConfig, load_config, threads_from_env
from fpp_lab.errors import ConfigError, ConfigMismatchError, FppLabError
from fpp_lab.lattice import Box, origin
from fpp_lab.runner import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, merge_dirs, run

logger = logging.getLogger(__name__)

# ANSI color codes for terminal output
GREEN = '\033[92m'
RED = '\033[91m'
BLUE = '\033[94m'
RESET = '\033[0m'
BOLD = '\033[1m'

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'


def print_header(title: str) -> None:
    print(f"\n{BLUE}{BOLD}{'=' * 60}{RESET}")
    print(f"{BLUE}{BOLD}{title:^60}{RESET}")
    print(f"{BLUE}{BOLD}{'=' * 60}{RESET}\n")


def print_check(name: str, passed: bool, details: str = "") -> bool:
    mark = f"{GREEN}✓{RESET}" if passed else f"{RED}✗{RESET}"
    print(f"{mark} {name}")
    if details:
        print(f"  {details}")
    return passed


def validate(path: Path) -> int:
    """Print one check line per validation step; 0 when every check passes."""
    print_header(f"fpp-lab {__version__} - config validation")
    try:
        config = load_config(path)
    except ConfigError as e:
        print_check(f"Config parses: {path}", False, str(e))
        return EXIT_CONFIG
    print_check(f"Config parses: {path}", True)
    print_check(f"Experiment: {config.experiment}", True)
    print_check(f"Distribution: {config.distribution.to_dict()}", True)

    checks: List[bool] = []
    try:
        experiments.check_params(config)
        checks.append(print_check("Parameters consistent", True))
    except (FppLabError, ValueError) as e:
        checks.append(print_check("Parameters consistent", False, str(e)))
    window = Box(origin(config.dimension), config.window_radius)
    checks.append(print_check(f"Window: {window.describe()}", True))

    ok = all(checks)
    print(f"\n{GREEN if ok else RED}{BOLD}{'Config is valid' if ok else 'Config is invalid'}{RESET}")
    return EXIT_OK if ok else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='fpp-lab', description="First-passage percolation laboratory")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('--verbose', '-v', action='store_true', help="debug logging")
    sub = parser.add_subparsers(dest='command', required=True)

    run_parser = sub.add_parser('run', help="run one experiment")
    run_parser.add_argument('--config', required=True, type=Path, help="experiment TOML file")
    run_parser.add_argument('--out', required=True, type=Path, help="output directory")
    run_parser.add_argument('--threads', type=int, default=None,
                            help="worker threads (default: FPP_LAB_THREADS or 1)")
    run_parser.add_argument('--strict', action='store_true',
                            help="exit 3 when the censored fraction exceeds the threshold")

    merge_parser = sub.add_parser('merge', help="pool report directories")
    merge_parser.add_argument('dirs', nargs='+', type=Path, help="report directories")
    merge_parser.add_argument('--out', required=True, type=Path, help="output directory")

    validate_parser = sub.add_parser('validate', help="check a config without running it")
    validate_parser.add_argument('--config', required=True, type=Path, help="experiment TOML file")
    return parser


def _run(args: argparse.Namespace) -> int:
    config: ExperimentConfig = load_config(args.config)
    threads = args.threads if args.threads is not None else threads_from_env()
    if threads < 1:
        raise ConfigError(f"--threads must be positive, got {threads}")
    result = run(config, args.out, threads=threads, strict=args.strict)
    return result.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)

    try:
        if args.command == 'validate':
            return validate(args.config)
        if args.command == 'merge':
            merge_dirs(args.dirs, args.out)
            return EXIT_OK
        return _run(args)
    except ConfigMismatchError as e:
        logger.error(f"Cannot merge: {e}")
        return EXIT_FAILURE
    except (ConfigError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except FppLabError as e:
        logger.error(f"Experiment failed: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
