"""Figures for hypersinh experiment outputs.

Strictly post-hoc: figures display the statistics carried by the CSV/JSON
outputs and overlay the reference laws; nothing is recomputed here.
"""

__version__ = "0.1.0"

from .figures import FigureSpec, SchemaMismatch, render  # noqa: F401
