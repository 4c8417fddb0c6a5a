"""
Helpers shared by the CLI subcommands
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional

from app.core.config import read_run_config
from app.core.exceptions import ConfigError

logger = logging.getLogger(__name__)


def parse_set(values: Optional[List[str]]) -> Dict[str, str]:
    """--set key=value pairs"""
    overrides = {}
    for item in values or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got '{item}'", fields=[item])
        overrides[key.strip()] = value.strip()
    return overrides


def flat_config(args: argparse.Namespace, **flags) -> Dict[str, object]:
    """Config file keys, overridden by --set, overridden by explicit CLI flags"""
    flat: Dict[str, object] = {}
    if getattr(args, "config", None):
        flat.update(read_run_config(Path(args.config)))
        logger.info(f"Loaded run config from {args.config}")
    flat.update(parse_set(getattr(args, "set", None)))
    flat.update({key: value for key, value in flags.items() if value is not None})
    return flat


def add_config_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="run config file (key=value lines, '#' comments)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")
    parser.add_argument("--seed", type=int, help="random seed (falls back to JMRMT_SEED)")
