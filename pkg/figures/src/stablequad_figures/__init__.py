"""Render figures from stablequad output files (CSV/JSON only — the
library itself is not imported, so images can be produced anywhere the
artifacts live)."""

from .io import SchemaError, read_model, read_sweep, read_trajectory, sweep_curves
from .render import (
    KINDS,
    FigureSpec,
    build,
    close,
    normalized_spectrum,
    render,
    scatter_points,
)

__all__ = [
    "KINDS",
    "FigureSpec",
    "SchemaError",
    "build",
    "close",
    "normalized_spectrum",
    "read_model",
    "read_sweep",
    "read_trajectory",
    "render",
    "scatter_points",
    "sweep_curves",
]

__version__ = "0.1.0"
