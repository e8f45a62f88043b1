"""Two-type CBI diffusion: exact moments, simulation, estimation and Monte Carlo runs."""

from ._core import (
    Error,
    ModelParams,
    conditional_mean,
    conditional_variance,
    estimate,
    model_params,
    phi,
    regression_coefficients,
    run_experiment,
    simulate,
    stationary_laplace,
    transition_laplace,
)

__all__ = [
    "Error",
    "ModelParams",
    "conditional_mean",
    "conditional_variance",
    "estimate",
    "model_params",
    "phi",
    "regression_coefficients",
    "run_experiment",
    "simulate",
    "stationary_laplace",
    "transition_laplace",
]
