"""Figure rendering for spectra sweep, crossing-event and manifold CSV files.

This package talks to the analysis tool only through its exported CSV
files; it never imports it.  The expected column layouts are documented in
csvio and enforced before any drawing happens.
"""

from .csvio import SchemaError, load_events, load_manifold, load_sweep
from .figures import FigureSpec, render

__all__ = [
    "FigureSpec",
    "SchemaError",
    "load_events",
    "load_manifold",
    "load_sweep",
    "render",
]
