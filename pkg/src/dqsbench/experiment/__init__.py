"""Config-driven experiment orchestration and output."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .runner import CSV_COLUMNS, ExperimentResult, compare, export, run_experiment

__all__ = [
    "CSV_COLUMNS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "compare",
    "export",
    "load_config",
    "parse_config",
    "run_experiment",
]
