"""The four model families: three quantum circuits and a classical MLP."""

from .common import (
    KINDS,
    ConfigError,
    Model,
    ModelConfig,
    canonical_config,
    count_params,
    load_model,
    save_model,
)
from .train import (
    TrainConfig,
    TrainingError,
    classical_backprop_forces,
    default_train_config,
    init_model,
    predict_energy,
    predict_energy_batch,
    predict_forces,
    train,
)

__all__ = [
    "KINDS", "ConfigError", "Model", "ModelConfig", "canonical_config",
    "count_params", "load_model", "save_model", "TrainConfig", "TrainingError",
    "classical_backprop_forces", "default_train_config", "init_model",
    "predict_energy", "predict_energy_batch", "predict_forces", "train",
]
