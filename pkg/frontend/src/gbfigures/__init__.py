"""Figure rendering for the battery-cycle CSV artifacts."""

from .figures import FIGURE_IDS, FigureJob, SchemaError, load_sweep, load_trace, render

__all__ = ["FIGURE_IDS", "FigureJob", "SchemaError", "load_sweep", "load_trace", "render"]
