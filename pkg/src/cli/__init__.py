"""
Command Line Interface

argparse front end: one sub-parser per subcommand, registered from the
modules in ``src.cli.commands``. Toolkit errors map to exit codes
2 (validation), 3 (data/schema), 4 (numerical) and 5 (I/O).
"""

import argparse
import sys
from typing import Optional, Sequence

import structlog

from src import __version__
from src.core.errors import WeakTrajError
from src.core.logging_config import configure_logging

logger = structlog.get_logger(__name__)


def common_options() -> argparse.ArgumentParser:
    """Flags shared by every subcommand"""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="run configuration (JSON or YAML); defaults to the standard run")
    parent.add_argument("--mode", help="corrected | legacy | custom:key=value,...")
    parent.add_argument("--jobs", type=int, default=None, help="worker threads for per-plane stages")
    parent.add_argument("--seed", type=int, default=None, help="override sensor.noise.rng_seed")
    parent.add_argument("--force", action="store_true", help="allow artifacts from other configurations")
    parent.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parent.add_argument("--log-format", choices=["json", "console"], default=None)
    return parent


def build_parser() -> argparse.ArgumentParser:
    from src.cli.commands import bohm, compare, reconstruct, report, run, synthesize

    parser = argparse.ArgumentParser(
        prog="weaktraj",
        description="Average photon trajectories from weak-measurement frames, checked against Bohm trajectories",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    parent = common_options()
    for module in (synthesize, reconstruct, bohm, compare, report, run):
        module.register(subparsers, parent)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_format)
    try:
        return args.func(args)
    except WeakTrajError as e:
        logger.error("command_failed", command=args.command, error=str(e),
                     error_type=type(e).__name__, exit_code=e.exit_code, **e.details)
        print(f"weaktraj {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:  # pragma: no cover
        logger.exception("command_crashed", command=args.command)
        print(f"weaktraj {args.command}: unexpected error: {e}", file=sys.stderr)
        return 1
