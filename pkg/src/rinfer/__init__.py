"""Fisherian randomization inference for before-and-after studies with many units."""

from .assignment import (
    AssignmentDraw,
    AssignmentMatrix,
    MechanismSpec,
    enumerate_draws,
    expand,
    factual_draw,
    sample_draw,
)
from .diagnostics import falsification_scan, select_window
from .inference import confidence_interval, joint_test, joint_tests, randomization_test
from .panel import AdoptionTime, PanelDataset, PanelSchema, WindowView, load_panel, unit_averages, window
from .report import RunConfig, derive_summary, run
from .statistics import StatisticConfig, combine, detrend, diff_in_means

__all__ = [
    "AdoptionTime", "AssignmentDraw", "AssignmentMatrix", "MechanismSpec", "PanelDataset",
    "PanelSchema", "RunConfig", "StatisticConfig", "WindowView", "combine",
    "confidence_interval", "derive_summary", "detrend", "diff_in_means", "enumerate_draws",
    "expand", "factual_draw", "falsification_scan", "joint_test", "joint_tests", "load_panel",
    "randomization_test", "run", "sample_draw", "select_window", "unit_averages", "window",
]
__version__ = "0.1.0"
