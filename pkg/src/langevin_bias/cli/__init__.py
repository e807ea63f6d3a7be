"""Experiment runner: configs and presets, chain execution, CSV/JSON/SVG output."""

from .config import ConfigError, ExperimentConfig, build_config, parse_config
from .runner import closed_form_density, run_experiment
from .svg import emit_plot

__all__ = ["ConfigError", "ExperimentConfig", "build_config", "closed_form_density", "emit_plot",
           "parse_config", "run_experiment"]
