"""Figure specification: which CSVs to draw and how.

A spec is a JSON object::

    {
      "output": "figure.png",
      "x_column": "n",
      "rate_column": "egr_hz",
      "fidelity_column": "fidelity",
      "group_by": "distance_km",            // optional: one series per value
      "rate_log_scale": true,               // default true
      "title": "...",                       // optional
      "series": [
        {"csv": "theory.csv", "label": "theory", "style": "line"},
        {"csv": "sim.csv", "label": "simulation", "style": "markers",
         "error_column": "fidelity_sem",    // optional: fidelity error bars
         "rate_error_column": "egr_sem",    // optional: rate error bars
         "censored_column": "censored"}     // optional: open markers + note
      ]
    }

Unknown keys are rejected so a typo cannot silently change a figure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .csvdata import FigplotsError

__all__ = ["SeriesSpec", "FigureSpec", "load_spec", "parse_spec"]

_SERIES_KEYS = {
    "csv", "label", "style", "error_column", "rate_error_column", "censored_column",
}
_SPEC_KEYS = {
    "output", "x_column", "rate_column", "fidelity_column", "group_by",
    "rate_log_scale", "title", "series",
}


@dataclass(frozen=True)
class SeriesSpec:
    csv: str
    label: str
    style: str = "line"  # "line" | "markers"
    error_column: str | None = None
    rate_error_column: str | None = None
    censored_column: str | None = None

    def __post_init__(self):
        if self.style not in ("line", "markers"):
            raise FigplotsError(f"series style must be line|markers, got '{self.style}'")


@dataclass(frozen=True)
class FigureSpec:
    output: str
    series: tuple[SeriesSpec, ...]
    x_column: str = "n"
    rate_column: str = "egr_hz"
    fidelity_column: str = "fidelity"
    group_by: str | None = None
    rate_log_scale: bool = True
    title: str | None = None

    def __post_init__(self):
        if not self.series:
            raise FigplotsError("figure spec needs at least one series")
        fmt = Path(self.output).suffix.lower()
        if fmt not in (".png", ".svg", ".pdf"):
            raise FigplotsError(f"unsupported output format '{fmt}'")


def parse_spec(raw: dict, base_dir: Path | None = None) -> FigureSpec:
    if not isinstance(raw, dict):
        raise FigplotsError("figure spec must be a JSON object")
    for key in raw:
        if key not in _SPEC_KEYS:
            raise FigplotsError(f"unknown figure-spec key '{key}'")
    series = []
    for idx, entry in enumerate(raw.get("series", [])):
        if not isinstance(entry, dict):
            raise FigplotsError(f"series[{idx}] must be an object")
        for key in entry:
            if key not in _SERIES_KEYS:
                raise FigplotsError(f"unknown key 'series[{idx}].{key}'")
        entry = dict(entry)
        if base_dir is not None and "csv" in entry:
            entry["csv"] = str((base_dir / entry["csv"]).resolve())
        try:
            series.append(SeriesSpec(**entry))
        except TypeError as exc:
            raise FigplotsError(f"series[{idx}]: {exc}") from exc
    fields = {k: v for k, v in raw.items() if k != "series"}
    if base_dir is not None and "output" in fields:
        fields["output"] = str((base_dir / fields["output"]).resolve())
    try:
        return FigureSpec(series=tuple(series), **fields)
    except TypeError as exc:
        raise FigplotsError(str(exc)) from exc


def load_spec(path: str | Path) -> FigureSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FigplotsError(f"{path} is not valid JSON: {exc}") from exc
    return parse_spec(raw, base_dir=path.parent)
