"""Tabular data model, CSV ingestion with schema inference, and error masks.

A Table is an immutable column store. Numeric columns hold float64 with NaN
as the null sentinel; categorical columns hold int32 codes into a per-column
category dictionary with -1 as the null sentinel. Both sentinels are
out-of-band: they can never collide with a real value, which matters because
the downstream classifier must be able to see missingness explicitly.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

NULL_CODE = -1  # categorical null sentinel


class CsvFormatError(ValueError):
    """Raised when a CSV file violates the expected shape or schema."""


class MaskFormatError(ValueError):
    """Raised when a mask file does not match its declared shape."""


class ColumnKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind
    values: np.ndarray
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("column name must be non-empty")
        if self.kind is ColumnKind.NUMERIC:
            v = np.ascontiguousarray(self.values, dtype=np.float64)
            if np.any(np.isinf(v)):
                raise ValueError(f"column {self.name!r}: numeric cells must be finite")
            if self.categories is not None:
                raise ValueError("numeric columns carry no category dictionary")
        else:
            v = np.ascontiguousarray(self.values, dtype=np.int32)
            if self.categories is None:
                raise ValueError("categorical columns need a category dictionary")
            if len(set(self.categories)) != len(self.categories):
                raise ValueError("category labels must be unique")
            n_cats = len(self.categories)
            valid = (v == NULL_CODE) | ((v >= 0) & (v < n_cats))
            if not np.all(valid):
                raise ValueError(f"column {self.name!r}: category code out of range")
        object.__setattr__(self, "values", _frozen(v))

    def missing(self) -> np.ndarray:
        """Boolean vector, True where the cell is the null sentinel."""
        if self.kind is ColumnKind.NUMERIC:
            return np.isnan(self.values)
        return self.values == NULL_CODE

    def n_distinct(self) -> int:
        """Distinct observed (non-null) values."""
        obs = self.values[~self.missing()]
        return int(len(np.unique(obs)))

    def with_nulls(self, rows: np.ndarray) -> "Column":
        """Copy of the column with the given row positions set to null."""
        v = self.values.copy()
        v.flags.writeable = True
        if self.kind is ColumnKind.NUMERIC:
            v[rows] = np.nan
        else:
            v[rows] = NULL_CODE
        return Column(self.name, self.kind, v, self.categories)

    def take(self, rows: np.ndarray) -> "Column":
        return Column(self.name, self.kind, self.values[rows].copy(), self.categories)

    def cell_text(self, i: int) -> str:
        """The cell as CSV text; null renders as the empty string."""
        if self.kind is ColumnKind.NUMERIC:
            v = float(self.values[i])
            return "" if math.isnan(v) else repr(v)
        code = int(self.values[i])
        return "" if code == NULL_CODE else self.categories[code]


@dataclass(frozen=True)
class Table:
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.columns:
            raise ValueError("a table needs at least one column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names: {sorted(names)}")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) != 1:
            raise ValueError("all columns must have the same number of rows")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0].values)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, j: int) -> Column:
        return self.columns[j]

    def col_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(f"no column named {name!r}")

    def take(self, rows: np.ndarray) -> "Table":
        """Row subset in the given order (used for CV folds)."""
        return Table(tuple(c.take(rows) for c in self.columns))


@dataclass(frozen=True)
class ErrorMask:
    bits: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.ndim != 2:
            raise ValueError("mask must be a 2-d matrix")
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(b))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape


@dataclass(frozen=True)
class MaskColumn:
    bits: np.ndarray
    source_column: int

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if b.ndim != 1:
            raise ValueError("mask column must be a vector")
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "bits", _frozen(b))

    @property
    def error_count(self) -> int:
        return int(self.bits.sum())


def _parse_numeric(cell: str) -> float | None:
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _normalize_hints(
    schema_hints: Mapping[str, ColumnKind | str] | None,
) -> dict[str, ColumnKind]:
    if not schema_hints:
        return {}
    out = {}
    for name, kind in schema_hints.items():
        out[name] = kind if isinstance(kind, ColumnKind) else ColumnKind(kind)
    return out


def load_csv(
    path: str | Path,
    schema_hints: Mapping[str, ColumnKind | str] | None = None,
) -> Table:
    """Load an RFC-4180 CSV with a mandatory header row.

    Empty cells are null. A column is Numeric when every non-empty cell
    parses as a finite real, Categorical otherwise; `schema_hints` overrides
    the inference per column name.
    """
    hints = _normalize_hints(schema_hints)
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file, header row required") from None
        if any(not name for name in header):
            raise CsvFormatError(f"{path}: empty column name in header")
        if len(set(header)) != len(header):
            raise CsvFormatError(f"{path}: duplicate column names in header")
        if len(header) < 2:
            raise CsvFormatError(f"{path}: at least two columns required")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}:{lineno}: row has {len(row)} cells, header has {len(header)}"
                )
            rows.append(row)

    unknown = set(hints) - set(header)
    if unknown:
        raise CsvFormatError(f"{path}: schema hints for unknown columns {sorted(unknown)}")

    columns = []
    for j, name in enumerate(header):
        cells = [r[j] for r in rows]
        kind = hints.get(name)
        if kind is None:
            numeric = all(_parse_numeric(c) is not None for c in cells if c != "")
            kind = ColumnKind.NUMERIC if numeric else ColumnKind.CATEGORICAL
        columns.append(_build_column(name, kind, cells, path))
    return Table(tuple(columns))


def _build_column(name: str, kind: ColumnKind, cells: list[str], path) -> Column:
    if kind is ColumnKind.NUMERIC:
        values = np.empty(len(cells), dtype=np.float64)
        for i, c in enumerate(cells):
            if c == "":
                values[i] = np.nan
            else:
                v = _parse_numeric(c)
                if v is None:
                    raise CsvFormatError(
                        f"{path}: column {name!r} hinted numeric but cell {c!r} does not parse"
                    )
                values[i] = v
        return Column(name, kind, values)
    labels = sorted({c for c in cells if c != ""})
    code_of = {lab: i for i, lab in enumerate(labels)}
    codes = np.array([NULL_CODE if c == "" else code_of[c] for c in cells], dtype=np.int32)
    return Column(name, kind, codes, tuple(labels))


def write_csv(table: Table, path: str | Path) -> None:
    """Write a table as CSV; nulls become empty cells. Loading the result
    back (same schema hints, if any were used) reproduces values and schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.names)
        for i in range(table.n_rows):
            writer.writerow([c.cell_text(i) for c in table.columns])


def mask_from_missing(table: Table) -> ErrorMask:
    """Mask with 1 exactly where a cell is the null sentinel."""
    bits = np.column_stack([c.missing() for c in table.columns]).astype(np.uint8)
    return ErrorMask(bits)


def mask_column(mask: ErrorMask, j: int) -> MaskColumn:
    n_cols = mask.shape[1]
    if not 0 <= j < n_cols:
        raise IndexError(f"column index {j} out of range for mask with {n_cols} columns")
    return MaskColumn(mask.bits[:, j].copy(), source_column=j)


def drop_column(table: Table, j: int) -> Table:
    if not 0 <= j < table.n_cols:
        raise IndexError(f"column index {j} out of range")
    if table.n_cols < 2:
        raise ValueError("cannot drop the only column of a table")
    return Table(tuple(c for k, c in enumerate(table.columns) if k != j))


def save_mask(mask: ErrorMask, path: str | Path) -> None:
    """Text format: first line "rows cols", then one line of 0/1 digits per row."""
    n_rows, n_cols = mask.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n_rows} {n_cols}\n")
        for i in range(n_rows):
            fh.write(" ".join(str(int(b)) for b in mask.bits[i]) + "\n")


def load_mask(path: str | Path) -> ErrorMask:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise MaskFormatError(f"{path}: first line must be 'rows cols'")
        try:
            n_rows, n_cols = int(header[0]), int(header[1])
        except ValueError:
            raise MaskFormatError(f"{path}: first line must be 'rows cols'") from None
        bits = np.zeros((n_rows, n_cols), dtype=np.uint8)
        for i in range(n_rows):
            tokens = fh.readline().split()
            if len(tokens) != n_cols:
                raise MaskFormatError(
                    f"{path}: row {i} has {len(tokens)} entries, header declared {n_cols}"
                )
            for j, t in enumerate(tokens):
                if t == "1":
                    bits[i, j] = 1
                elif t != "0":
                    raise MaskFormatError(f"{path}: row {i} has non-binary entry {t!r}")
        if fh.readline().strip():
            raise MaskFormatError(f"{path}: more rows than the header declared")
    return ErrorMask(bits)
