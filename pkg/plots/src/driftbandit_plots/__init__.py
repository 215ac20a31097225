"""Offline figures from driftbandit harness output files."""

__version__ = "0.1.0"

from .figures import plot_exponent_fit, plot_regret_curves, plot_shift_overlay
from .io import CrossCheckError, load_run, load_shift_times, load_summary

__all__ = [
    "CrossCheckError",
    "load_run",
    "load_shift_times",
    "load_summary",
    "plot_exponent_fit",
    "plot_regret_curves",
    "plot_shift_overlay",
]
