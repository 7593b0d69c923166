"""Slow-fast switching diffusions: Hamiltonians, rate functionals, experiments."""

from ._core import (
    ConfigParseError,
    Error,
    Model,
    NumericalFailureError,
    __version__,
    action,
    config_hash,
    distance,
    donsker_varadhan,
    exp_map,
    invariant_measure,
    log_map,
    model,
    resolvent,
    run_experiment,
    simulate,
    theoretical_rate,
)

__all__ = [
    "ConfigParseError",
    "Error",
    "Model",
    "NumericalFailureError",
    "__version__",
    "action",
    "config_hash",
    "distance",
    "donsker_varadhan",
    "exp_map",
    "invariant_measure",
    "log_map",
    "model",
    "resolvent",
    "run_experiment",
    "simulate",
    "theoretical_rate",
]
