"""Python bindings for the pgvi library."""

from ._pgvi import (
    ConfigError,
    DataError,
    KernelParams,
    Model,
    NumericError,
    class_prob,
    fit,
    gibbs,
    load_dataset,
    pg_kl_term,
    pg_mean,
    pg_sample,
    theta,
)

__all__ = [
    "ConfigError",
    "DataError",
    "KernelParams",
    "Model",
    "NumericError",
    "class_prob",
    "fit",
    "gibbs",
    "load_dataset",
    "pg_kl_term",
    "pg_mean",
    "pg_sample",
    "theta",
]
