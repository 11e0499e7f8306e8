"""Relational synthetic data from a private Bayesian network and a structured-output LLM."""

from ._core import (
    ConfigError,
    DataError,
    Dataset,
    EndpointError,
    Error,
    MockEndpoint,
    Model,
    chi2_homogeneity,
    evaluate,
    generate_toy,
    kl_score,
    realism,
    run_cli,
    smoothed_kl,
    synthesize,
    write_toy,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "EndpointError",
    "Error",
    "MockEndpoint",
    "Model",
    "chi2_homogeneity",
    "evaluate",
    "generate_toy",
    "kl_score",
    "realism",
    "run_cli",
    "smoothed_kl",
    "synthesize",
    "write_toy",
]
