from ._core import (
    Error,
    InputError,
    Tracker,
    cli,
    default_config,
    iou,
    otb_metrics,
    run_sequence,
    solve_weights,
    synth,
)

__all__ = [
    "Error",
    "InputError",
    "Tracker",
    "cli",
    "default_config",
    "iou",
    "otb_metrics",
    "run_sequence",
    "solve_weights",
    "synth",
]
