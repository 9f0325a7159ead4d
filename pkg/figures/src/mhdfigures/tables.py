"""CSV access with named-column schema errors."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """A required file, column, or cell is missing or unreadable."""


def _parses(value: str) -> bool:
    try:
        float(value)
    except ValueError:
        return False
    return True


class Table:
    """Column view of one CSV file.

    Cells stay as strings until a column is requested as floats, so a
    bad cell is reported with the column name and the offending text.
    """

    def __init__(self, path, header: list[str], rows: list[list[str]]):
        self.path = Path(path)
        self.header = list(header)
        self._n = len(rows)
        self._cols = {name: [row[i] for row in rows]
                      for i, name in enumerate(header)}

    def __len__(self) -> int:
        return self._n

    def has(self, name: str) -> bool:
        return name in self._cols

    def require(self, *names: str) -> None:
        missing = [n for n in names if n not in self._cols]
        if missing:
            have = ", ".join(self.header) if self.header else "no columns"
            raise SchemaError(f"{self.path.name}: missing column "
                              f"'{missing[0]}' (have {have})")

    def strings(self, name: str) -> np.ndarray:
        self.require(name)
        return np.array(self._cols[name], dtype=object)

    def floats(self, name: str) -> np.ndarray:
        self.require(name)
        raw = self._cols[name]
        try:
            return np.asarray(raw, dtype=float)
        except ValueError:
            bad = next(v for v in raw if not _parses(v))
            raise SchemaError(f"{self.path.name}: column '{name}' has a "
                              f"non-numeric entry {bad!r}") from None


def load_table(path) -> Table:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty file, expected a "
                              "header row") from None
        rows = [row for row in reader if row]
    for row in rows:
        if len(row) != len(header):
            raise SchemaError(f"{path.name}: row with {len(row)} cells "
                              f"under a {len(header)}-column header")
    return Table(path, header, rows)
