"""Command-line front end: declarative configs in, artifacts out."""

from .config import (ExperimentConfig, McParams, ViParams, apply_overrides,
                     build_model, load_config, parse_config)
from .presets import PRESET_NAMES, preset, preset_text
from .report import emit_dot, run_experiment

__all__ = ["ExperimentConfig", "McParams", "ViParams", "apply_overrides",
           "build_model", "load_config", "parse_config", "PRESET_NAMES",
           "preset", "preset_text", "emit_dot", "run_experiment"]
