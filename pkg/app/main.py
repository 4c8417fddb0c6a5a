"""
JM-RMT Joint Modeling Engine - command-line entry point
Subcommands: simulate, fit, compare, oracle, diagnose
"""

import argparse
import logging
import sys
from typing import List, Optional

from app.core.config import settings
from app.core.exceptions import EXIT_FAILURE, JMRMTError
from app.core.log_setup import configure_logging
from app.routers import compare, diagnose, fit, oracle, simulate

logger = logging.getLogger(__name__)

ROUTERS = (simulate, fit, compare, oracle, diagnose)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jmrmt",
        description="Bayesian joint model of risk factors, medication and time-to-event",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.PROJECT_VERSION}")
    parser.add_argument("--log-level", help=f"logging level (default {settings.LOG_LEVEL})")
    parser.add_argument("--quiet", action="store_true", help="warnings only, no progress bars or tables")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for router in ROUTERS:
        router.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, quiet=args.quiet)

    try:
        return args.handler(args)
    except JMRMTError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.error("Interrupted")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
