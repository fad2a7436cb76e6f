"""Python bindings for the boundary-layer MHD channel laboratory."""

from ._core import (
    ConfigError,
    CflError,
    DomainError,
    Grid,
    IdealState,
    PreconditionError,
    __version__,
    beta_report,
    beta_values,
    check_assumption,
    fit_rate,
    lemma31_norms,
    run_experiment,
    validate_config,
)

__all__ = [
    "ConfigError",
    "CflError",
    "DomainError",
    "Grid",
    "IdealState",
    "PreconditionError",
    "__version__",
    "beta_report",
    "beta_values",
    "check_assumption",
    "fit_rate",
    "lemma31_norms",
    "run_experiment",
    "validate_config",
]
