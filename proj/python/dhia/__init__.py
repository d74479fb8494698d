"""Incomplete multi-view clustering with hierarchical imputation and alignment."""

from ._dhia import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    Error,
    NumericError,
    complete,
    default_config,
    evaluate,
    generate_mask,
    pca,
    synthesize,
    train,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "Error",
    "NumericError",
    "complete",
    "default_config",
    "evaluate",
    "generate_mask",
    "pca",
    "synthesize",
    "train",
]
