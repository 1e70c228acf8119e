"""Datasets, training, experiment recipes and the command-line interface."""

from .config import EXPERIMENTS, ExperimentSpec, load_config, make_spec, parse_config
from .data import Dataset, gen_rosenbrock2d, gen_rosenbrock_nd, gen_step, rosenbrock, rosenbrock_nd, sine_term
from .experiments import make_data, make_model, run_experiment
from .optim import Adam, one_cycle
from .train import ExperimentResult, TrainConfig, train

__all__ = [
    "EXPERIMENTS",
    "Adam",
    "Dataset",
    "ExperimentResult",
    "ExperimentSpec",
    "TrainConfig",
    "gen_rosenbrock2d",
    "gen_rosenbrock_nd",
    "gen_step",
    "load_config",
    "make_data",
    "make_model",
    "make_spec",
    "one_cycle",
    "parse_config",
    "rosenbrock",
    "rosenbrock_nd",
    "run_experiment",
    "sine_term",
    "train",
]
