"""Deterministic rendering of the two-panel rate/fidelity figure.

One rate panel (log y by default; rates span orders of magnitude across
distances) and one fidelity panel (linear) side by side. Groups and series
are drawn in sorted order, the style sheet is fixed, and savefig metadata is
stripped, so the same spec and CSVs always produce identical bytes. All
numbers come straight from the CSVs; nothing is recomputed here.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .csvdata import FigplotsError, Table, read_table
from .spec import FigureSpec, SeriesSpec

__all__ = ["render"]

_DPI = 100
_FIGSIZE = (9.0, 3.6)
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_MARKERS = ("o", "s", "^", "D", "v", "P")


def _series_groups(table: Table, spec: FigureSpec):
    """Sorted (group_label, row_indices) partitions of one CSV."""
    if spec.group_by is None:
        return [(None, list(range(len(table.rows))))]
    idx = table.require(spec.group_by)
    groups: dict[str, list[int]] = {}
    for row_no, row in enumerate(table.rows):
        groups.setdefault(row[idx], []).append(row_no)

    def sort_key(value: str):
        try:
            return (0, float(value), value)
        except ValueError:
            return (1, 0.0, value)

    return [(value, groups[value]) for value in sorted(groups, key=sort_key)]


def _column_points(table, rows, x_idx, y_col, err_col):
    xs, ys, errs = [], [], []
    y_vals = table.floats(y_col)
    e_vals = table.floats(err_col) if err_col else None
    x_vals = table.floats(table.columns[x_idx])
    for row_no in rows:
        if y_vals[row_no] is None or x_vals[row_no] is None:
            continue
        xs.append(x_vals[row_no])
        ys.append(y_vals[row_no])
        errs.append(e_vals[row_no] if e_vals else None)
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    return [xs[i] for i in order], [ys[i] for i in order], [errs[i] for i in order]


def _censored_flags(table: Table, series: SeriesSpec, rows):
    if series.censored_column is None:
        return [False] * len(rows)
    idx = table.require(series.censored_column)
    return [table.rows[r][idx] in ("1", "true", "True") for r in rows]


def _draw(ax, series, table, spec, x_idx, y_col, err_col, color, marker, group_label):
    rows_all = _series_groups(table, spec)
    for g_idx, (value, rows) in enumerate(rows_all):
        if group_label is not None and value != group_label:
            continue
        xs, ys, errs = _column_points(table, rows, x_idx, y_col, err_col)
        if not xs:
            continue
        label = series.label if value is None else f"{series.label} {value}"
        censored = _censored_flags(table, series, rows)
        any_censored = any(censored)
        if series.style == "line":
            ax.plot(xs, ys, color=color, linestyle="-", linewidth=1.4, label=label)
        else:
            yerr = [e if e is not None else 0.0 for e in errs]
            has_err = err_col is not None and any(e is not None for e in errs)
            ax.errorbar(
                xs, ys, yerr=yerr if has_err else None,
                color=color, marker=marker, linestyle="none",
                markersize=4.5, capsize=2.0, label=label,
                markerfacecolor="none" if any_censored else color,
            )
            if any_censored:
                ax.annotate(
                    "censored", (xs[-1], ys[-1]), textcoords="offset points",
                    xytext=(4, 4), fontsize=7, color=color,
                )


def render(spec: FigureSpec) -> Path:
    """Render the spec to its output path and return that path."""
    tables = [read_table(s.csv) for s in spec.series]
    # validate every referenced column up front so failures name the column
    for series, table in zip(spec.series, tables):
        table.require(spec.x_column)
        table.require(spec.rate_column)
        table.require(spec.fidelity_column)
        if spec.group_by is not None:
            table.require(spec.group_by)
        for col in (series.error_column, series.rate_error_column, series.censored_column):
            if col is not None:
                table.require(col)

    group_labels: list[str | None] = [None]
    if spec.group_by is not None:
        seen = []
        for table in tables:
            for value, _ in _series_groups(table, spec):
                if value not in seen:
                    seen.append(value)
        group_labels = sorted(seen, key=lambda v: (len(str(v)), str(v)))

    fig, (ax_rate, ax_fid) = plt.subplots(1, 2, figsize=_FIGSIZE, dpi=_DPI)
    for s_idx, (series, table) in enumerate(zip(spec.series, tables)):
        x_idx = table.require(spec.x_column)
        for g_idx, group_label in enumerate(group_labels):
            style_idx = (s_idx + g_idx * len(spec.series)) % len(_COLORS)
            color = _COLORS[style_idx]
            marker = _MARKERS[style_idx]
            _draw(ax_rate, series, table, spec, x_idx, spec.rate_column,
                  series.rate_error_column, color, marker, group_label)
            _draw(ax_fid, series, table, spec, x_idx, spec.fidelity_column,
                  series.error_column, color, marker, group_label)

    ax_rate.set_xlabel(spec.x_column)
    ax_rate.set_ylabel(spec.rate_column)
    if spec.rate_log_scale:
        ax_rate.set_yscale("log")
    ax_fid.set_xlabel(spec.x_column)
    ax_fid.set_ylabel(spec.fidelity_column)
    for ax in (ax_rate, ax_fid):
        ax.grid(True, linewidth=0.3, alpha=0.5)
        ax.legend(fontsize=7)
    if spec.title:
        fig.suptitle(spec.title, fontsize=10)
    fig.tight_layout()

    out = Path(spec.output)
    fmt = out.suffix.lstrip(".").lower()
    metadata = {"Software": None} if fmt == "png" else None
    if fmt == "svg":
        metadata = {"Date": None}
    fig.savefig(out, format=fmt, dpi=_DPI, metadata=metadata)
    plt.close(fig)
    return out
