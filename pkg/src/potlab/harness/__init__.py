"""Estimate-verification experiments: config files, checks, reports, CLI."""

from .config import ExperimentConfig, Instance, build_instance, load_config
from .checks import CHECKS, CheckReport, CheckRow, SolveCache, run_checks
from .cli import main, run_cli

__all__ = [
    "ExperimentConfig",
    "Instance",
    "build_instance",
    "load_config",
    "CHECKS",
    "CheckReport",
    "CheckRow",
    "SolveCache",
    "run_checks",
    "main",
    "run_cli",
]
