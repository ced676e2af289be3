"""Deterministic figure rendering for fedsim CSV outputs."""

__version__ = "0.1.0"

from .render import PlotJob, PlotError, SchemaError, EmptyDataError, render

__all__ = ["PlotJob", "PlotError", "SchemaError", "EmptyDataError", "render"]
