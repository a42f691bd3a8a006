"""Operator-facing service boundary: WebSocket/HTTP API and the headless CLI."""

from .plotstream import PlotChunk, PlotTap, decimate_for_plot

__all__ = ["PlotChunk", "PlotTap", "decimate_for_plot"]
