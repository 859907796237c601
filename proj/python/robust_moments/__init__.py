"""Distributionally robust regression over groups."""

from pkgutil import extend_path

__path__ = extend_path(__path__, __name__)

from ._core import (  # noqa: E402
    ConfigError,
    FittedModel,
    GroundTruth,
    GroupedDataset,
    ParseError,
    SolverError,
    ValidationError,
    __version__,
    evaluate,
    fit,
    generate_synthetic,
    load_dataset,
    load_model,
    run_checks,
    save_dataset,
    set_num_threads,
    solve_linear_game,
)

__all__ = [
    "ConfigError",
    "FittedModel",
    "GroundTruth",
    "GroupedDataset",
    "ParseError",
    "SolverError",
    "ValidationError",
    "__version__",
    "evaluate",
    "fit",
    "generate_synthetic",
    "load_dataset",
    "load_model",
    "run_checks",
    "save_dataset",
    "set_num_threads",
    "solve_linear_game",
]
