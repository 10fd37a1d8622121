"""Experiment runner, result files and CLI."""
from .config import ExperimentConfig, default_config, load_config
from .results import read_results, write_results
from .runner import ExperimentResult, Record, ber_floor, run_experiment, simulate

__all__ = ["ExperimentConfig", "ExperimentResult", "Record", "ber_floor",
           "default_config", "load_config", "read_results", "run_experiment",
           "simulate", "write_results"]
