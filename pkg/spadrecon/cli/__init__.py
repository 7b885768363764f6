"""
Command-line surface and run configuration
"""

from spadrecon.cli.commands import COMMANDS, build_parser, main
from spadrecon.cli.config import RunConfig, apply_environment, dump_run_config, load_run_config, parse_run_config

__all__ = [
    "main",
    "build_parser",
    "COMMANDS",
    "RunConfig",
    "load_run_config",
    "parse_run_config",
    "dump_run_config",
    "apply_environment",
]
