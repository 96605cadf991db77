"""Render figures from persisted CSV series and verdict JSON files.

This package consumes only files: comment-prefixed CSV series and the
verdict JSON documents written alongside them.  It never runs a simulation
and never imports the library that produced the data, so the two components
stay independently testable.
"""

from .io import SchemaError, Series, read_series, read_verdict
from .render import KINDS, FigureSpec, RenderResult, render

__all__ = [
    "FigureSpec",
    "KINDS",
    "RenderResult",
    "SchemaError",
    "Series",
    "read_series",
    "read_verdict",
    "render",
]
