"""Knowledge graph embeddings with sentence-level text representations."""

from ._stkrl import *  # noqa: F401,F403
from ._stkrl import (
    AggregationMode,
    EncoderKind,
    EnergyMode,
    HyperParams,
    LossMode,
    NormKind,
    SyntheticSpec,
    TrainConfig,
    generate_synthetic_dataset,
    run_cli,
    train,
)


def quick_config(**overrides):
    """TrainConfig with hyperparameters set from keyword arguments."""
    config = TrainConfig()
    for key, value in overrides.items():
        if not hasattr(config.hp, key):
            raise AttributeError(f"unknown hyperparameter: {key}")
        setattr(config.hp, key, value)
    return config
