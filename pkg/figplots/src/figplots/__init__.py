"""Deterministic two-panel rate/fidelity figures from repeatersim CSV files."""

__version__ = "0.1.0"

from .csvdata import FigplotsError, Table, read_table
from .render import render
from .spec import FigureSpec, SeriesSpec, load_spec, parse_spec
