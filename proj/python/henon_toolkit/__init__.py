"""Python bindings for the Hénon family toolkit."""

from ._henon import (
    Family,
    GreenEnclosure,
    HenonError,
    __version__,
    canonical_height,
    classify,
    commands,
    find_periodic,
    fixed_points,
    green,
    presets,
    render_green,
    run,
    saddle_experiment,
    semi_experiment,
)

__all__ = [
    "Family",
    "GreenEnclosure",
    "HenonError",
    "canonical_height",
    "classify",
    "commands",
    "find_periodic",
    "fixed_points",
    "green",
    "presets",
    "render_green",
    "run",
    "saddle_experiment",
    "semi_experiment",
]
