"""Figures from solver run directories.

Every renderer reads the documented CSV files of a run directory
(log.csv, grid.csv, metrics.csv, diagnostics/gradients.csv) and writes
one raster image. Run directories are never written to.
"""

from .tables import SchemaError, Table, load_table
from .cli import KINDS, FigureJob, main, render

__all__ = [
    "SchemaError",
    "Table",
    "load_table",
    "KINDS",
    "FigureJob",
    "main",
    "render",
]
