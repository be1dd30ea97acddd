"""Reader for repeatersim result CSV files.

The files carry a '#' comment header block (tool version, seed, manifest)
followed by one header row and data rows. Values arrive as strings; numeric
conversion happens at plot time so empty cells (absent fidelity, for
instance) can be skipped rather than guessed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

__all__ = ["FigplotsError", "Table", "read_table"]


class FigplotsError(ValueError):
    """Bad figure spec or malformed/incomplete input data."""


@dataclass(frozen=True)
class Table:
    path: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def require(self, column: str) -> int:
        if column not in self.columns:
            raise FigplotsError(
                f"column '{column}' not found in {self.path} "
                f"(has: {', '.join(self.columns)})"
            )
        return self.columns.index(column)

    def floats(self, column: str) -> list[float | None]:
        idx = self.require(column)
        out: list[float | None] = []
        for row in self.rows:
            cell = row[idx]
            out.append(float(cell) if cell != "" else None)
        return out


def read_table(path: str | Path) -> Table:
    lines = [
        line
        for line in Path(path).read_text().splitlines()
        if line and not line.startswith("#")
    ]
    if not lines:
        raise FigplotsError(f"{path} contains no CSV header")
    parsed = list(csv.reader(lines))
    header, rows = parsed[0], parsed[1:]
    if not rows:
        raise FigplotsError(f"{path} contains no data rows")
    return Table(path=str(path), columns=tuple(header), rows=tuple(map(tuple, rows)))
