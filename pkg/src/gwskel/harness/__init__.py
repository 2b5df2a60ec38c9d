"""Experiment drivers, statistics, records, and the command line."""

from .config import ExperimentConfig, load_config, parse_config_text
from .records import ExperimentRecord, RECORD_SCHEMA
from .stats import EmpiricalSummary, ks_distance

__all__ = [
    "ExperimentConfig",
    "ExperimentRecord",
    "EmpiricalSummary",
    "RECORD_SCHEMA",
    "ks_distance",
    "load_config",
    "parse_config_text",
]
