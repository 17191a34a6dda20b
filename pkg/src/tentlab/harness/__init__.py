"""Experiment harness: exponents, inequality probes, sweeps, configs and runs."""
from .config import ConfigError, load_config, validate
from .exponents import critical_exponents
from .runner import RunResult, run_experiment

__all__ = ["ConfigError", "RunResult", "critical_exponents", "load_config", "run_experiment", "validate"]
