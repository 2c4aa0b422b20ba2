"""Inject missing-value errors into a clean table under MCAR, MAR or MNAR.

Selection is deterministic rank/tail based: MCAR draws a uniform sample of
rows, MAR erases the rows whose conditioning-column values fall in the
chosen tail, MNAR does the same using the target column itself. Ties are
broken by a seeded random key so reruns with the same spec are identical.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from mechdetect.data import Column, ColumnKind, ErrorMask, Table


class Mechanism(enum.Enum):
    MCAR = "mcar"
    MAR = "mar"
    MNAR = "mnar"


class Tail(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class MechanismSpec:
    mechanism: Mechanism
    error_rate: float
    target_column: int
    conditioning_column: int | None = None
    tail: Tail = Tail.UPPER
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.error_rate < 1.0:
            raise ValueError("error_rate must be in (0, 1)")
        if self.mechanism is Mechanism.MAR:
            if self.conditioning_column is None:
                raise ValueError("MAR requires a conditioning column")
            if self.conditioning_column == self.target_column:
                raise ValueError("conditioning column must differ from the target column")
        elif self.conditioning_column is not None:
            raise ValueError(f"{self.mechanism.name} does not take a conditioning column")


@dataclass(frozen=True)
class PerturbationResult:
    perturbed: Table
    mask: ErrorMask
    spec: MechanismSpec


def error_budget(error_rate: float, n_rows: int) -> int:
    """Exact number of cells to erase: floor(rate * N).

    The small epsilon guards against rates like 0.29 whose float product
    lands a hair under the exact integer.
    """
    budget = math.floor(error_rate * n_rows + 1e-9)
    if budget < 1:
        raise ValueError(
            f"error rate {error_rate} yields zero errors on {n_rows} rows; "
            "a run with no errors is undefined"
        )
    return budget


def default_conditioning_column(table: Table, target_column: int) -> int:
    """Non-target column with the most distinct values (ties: lowest index)."""
    if table.n_cols < 2:
        raise ValueError("need at least two columns to pick a conditioning column")
    best, best_distinct = -1, -1
    for j, col in enumerate(table.columns):
        if j == target_column:
            continue
        d = col.n_distinct()
        if d > best_distinct:
            best, best_distinct = j, d
    return best


def _require_observed(column: Column, role: str) -> None:
    if column.missing().any():
        raise ValueError(f"{role} column {column.name!r} already contains nulls")


def _rank_order(column: Column, seed: int) -> np.ndarray:
    """Row order ascending by the column's values, seeded keys breaking ties.

    Categorical values rank by their category's (frequency, label) order, so
    rows are consumed category by category with a seeded shuffle inside the
    boundary category.
    """
    n = len(column.values)
    tiebreak = np.random.default_rng(seed).random(n)
    if column.kind is ColumnKind.NUMERIC:
        primary = column.values
    else:
        codes = column.values
        counts = np.bincount(codes, minlength=len(column.categories))
        cat_order = sorted(
            range(len(column.categories)),
            key=lambda c: (counts[c], column.categories[c]),
        )
        rank_of_cat = np.empty(len(column.categories), dtype=np.int64)
        for rank, c in enumerate(cat_order):
            rank_of_cat[c] = rank
        primary = rank_of_cat[codes]
    return np.lexsort((tiebreak, primary))


def _tail_rows(order: np.ndarray, budget: int, tail: Tail) -> np.ndarray:
    return order[:budget] if tail is Tail.LOWER else order[len(order) - budget :]


def _erase(table: Table, spec: MechanismSpec, rows: np.ndarray) -> PerturbationResult:
    j = spec.target_column
    bits = np.zeros((table.n_rows, table.n_cols), dtype=np.uint8)
    bits[rows, j] = 1
    columns = list(table.columns)
    columns[j] = columns[j].with_nulls(rows)
    return PerturbationResult(Table(tuple(columns)), ErrorMask(bits), spec)


def _validate_target(table: Table, spec: MechanismSpec) -> None:
    if not 0 <= spec.target_column < table.n_cols:
        raise IndexError(f"target column {spec.target_column} out of range")
    _require_observed(table.column(spec.target_column), "target")


def inject_mcar(table: Table, spec: MechanismSpec) -> PerturbationResult:
    """Erase a uniform random sample of rows, independent of all values."""
    if spec.mechanism is not Mechanism.MCAR:
        raise ValueError("spec mechanism must be MCAR")
    _validate_target(table, spec)
    budget = error_budget(spec.error_rate, table.n_rows)
    rng = np.random.default_rng(spec.seed)
    rows = rng.choice(table.n_rows, size=budget, replace=False)
    return _erase(table, spec, rows)


def inject_mar(table: Table, spec: MechanismSpec) -> PerturbationResult:
    """Erase the target cells of the rows in the chosen tail of the
    conditioning column; the mask depends only on that column and the seed."""
    if spec.mechanism is not Mechanism.MAR:
        raise ValueError("spec mechanism must be MAR")
    _validate_target(table, spec)
    k = spec.conditioning_column
    if not 0 <= k < table.n_cols:
        raise IndexError(f"conditioning column {k} out of range")
    cond = table.column(k)
    _require_observed(cond, "conditioning")
    budget = error_budget(spec.error_rate, table.n_rows)
    order = _rank_order(cond, spec.seed)
    return _erase(table, spec, _tail_rows(order, budget, spec.tail))


def inject_mnar(table: Table, spec: MechanismSpec) -> PerturbationResult:
    """Erase the target cells of the rows in the chosen tail of the target
    column's own clean values."""
    if spec.mechanism is not Mechanism.MNAR:
        raise ValueError("spec mechanism must be MNAR")
    _validate_target(table, spec)
    budget = error_budget(spec.error_rate, table.n_rows)
    order = _rank_order(table.column(spec.target_column), spec.seed)
    return _erase(table, spec, _tail_rows(order, budget, spec.tail))


_INJECTORS = {
    Mechanism.MCAR: inject_mcar,
    Mechanism.MAR: inject_mar,
    Mechanism.MNAR: inject_mnar,
}


def inject(table: Table, spec: MechanismSpec) -> PerturbationResult:
    return _INJECTORS[spec.mechanism](table, spec)
