"""Insole-pressure-to-skeleton pipeline.

Thin python surface over the native module: run pipeline stages with
:func:`cli_run`, read preprocessed datasets with :func:`load_artifacts`,
and score checkpoints with :func:`predict`, :func:`joint_errors`,
:func:`rmse` and :func:`median_std`.
"""

from p2pi._p2pi import (
    GRID_PERIOD,
    PipelineError,
    __version__,
    amplifier_gain,
    cli_run,
    joint_errors,
    load_artifacts,
    median_std,
    predict,
    rmse,
    task_ids,
)

__all__ = [
    "GRID_PERIOD",
    "PipelineError",
    "__version__",
    "amplifier_gain",
    "cli_run",
    "joint_errors",
    "load_artifacts",
    "median_std",
    "predict",
    "rmse",
    "task_ids",
]
