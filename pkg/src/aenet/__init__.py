"""Semantic-enhanced visual prompting for zero-shot learning, at desk scale."""

from .config import RunConfig, load_config, tiny_config
from .data import ZslDataset, generate_dataset
from .model import ModelParams, forward, init_params
from .train import TrainLog, evaluate_model, train

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "RunConfig",
    "TrainLog",
    "ZslDataset",
    "evaluate_model",
    "forward",
    "generate_dataset",
    "init_params",
    "load_config",
    "tiny_config",
    "train",
]
