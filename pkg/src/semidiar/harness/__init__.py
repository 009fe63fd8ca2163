"""Experiment driver: configuration, recipes, reports and the CLI."""

from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config_text
from .experiment import RECIPES, Protocol, RecipeResult, build_splits, run_recipe, train_seed

__all__ = ["ConfigError", "ExperimentConfig", "dump_config", "load_config", "parse_config_text",
           "RECIPES", "Protocol", "RecipeResult", "build_splits", "run_recipe", "train_seed"]
