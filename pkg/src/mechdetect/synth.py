"""Deterministic synthetic tables for exercising and benchmarking the detector.

Three families cycle through the suite: all-independent numeric columns,
tables with correlated numeric pairs, and mixed tables with categorical
columns. Every dataset designates one target column; the manifest records
whether that column is statistically independent of the rest, which is what
separates clean MNAR geometry from the correlated case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mechdetect.data import Column, ColumnKind, Table, write_csv

FAMILIES = ("independent", "correlated", "categorical")


@dataclass(frozen=True)
class SyntheticDataset:
    name: str
    table: Table
    target_column: str
    family: str
    independent_target: bool


def _numeric(rng: np.random.Generator, n: int, flavor: int) -> np.ndarray:
    flavor = flavor % 4
    if flavor == 0:
        return rng.normal(rng.uniform(-5, 5), rng.uniform(0.5, 3.0), size=n)
    if flavor == 1:
        return rng.uniform(-10, 10, size=n)
    if flavor == 2:
        return rng.lognormal(0.0, rng.uniform(0.3, 1.0), size=n)
    return rng.standard_t(df=5, size=n) * rng.uniform(1.0, 4.0)


def make_dataset(index: int, n_rows: int = 2000, n_cols: int = 8, base_seed: int = 0) -> SyntheticDataset:
    rng = np.random.default_rng(base_seed * 1_000_003 + index)
    family = FAMILIES[index % len(FAMILIES)]
    name = f"synth_{index:03d}_{family}"
    cols: list[Column] = []

    if family == "independent":
        for i in range(n_cols):
            cols.append(Column(f"x{i}", ColumnKind.NUMERIC, _numeric(rng, n_rows, index + i)))
        target = f"x{(index // 3) % n_cols}"
        independent_target = True
    elif family == "correlated":
        # two correlated pairs, the target belongs to one of them
        rho = rng.uniform(0.4, 0.7)
        for pair in range(2):
            a = _numeric(rng, n_rows, index + pair)
            a_std = (a - a.mean()) / (a.std() + 1e-12)
            b = rho * a_std + np.sqrt(1 - rho**2) * rng.normal(size=n_rows)
            cols.append(Column(f"x{2 * pair}", ColumnKind.NUMERIC, a))
            cols.append(Column(f"x{2 * pair + 1}", ColumnKind.NUMERIC, b))
        for i in range(4, n_cols):
            cols.append(Column(f"x{i}", ColumnKind.NUMERIC, _numeric(rng, n_rows, index + i)))
        target = "x3"
        independent_target = False
    else:
        for i in range(5):
            cols.append(Column(f"x{i}", ColumnKind.NUMERIC, _numeric(rng, n_rows, index + i)))
        # one categorical tied to x0's quantiles, one independent
        n_tied = 6
        quantiles = np.quantile(cols[0].values, np.linspace(0, 1, n_tied + 1)[1:-1])
        tied_codes = np.searchsorted(quantiles, cols[0].values).astype(np.int32)
        cols.append(
            Column("grade", ColumnKind.CATEGORICAL, tied_codes, tuple(f"g{i}" for i in range(n_tied)))
        )
        free_codes = rng.integers(0, 10, size=n_rows).astype(np.int32)
        cols.append(
            Column("region", ColumnKind.CATEGORICAL, free_codes, tuple(f"r{i:02d}" for i in range(10)))
        )
        cols.append(Column("x5", ColumnKind.NUMERIC, _numeric(rng, n_rows, index + 7)))
        target = "x3"  # independent numeric, never the one the categoricals track
        independent_target = True

    return SyntheticDataset(name, Table(tuple(cols)), target, family, independent_target)


def generate_suite(
    n_datasets: int = 30, n_rows: int = 2000, n_cols: int = 8, base_seed: int = 0
) -> list[SyntheticDataset]:
    return [make_dataset(i, n_rows, n_cols, base_seed) for i in range(n_datasets)]


def materialize_suite(suite, out_dir: str | Path) -> dict:
    """Write each dataset as CSV plus a manifest; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"datasets": []}
    for ds in suite:
        path = out_dir / f"{ds.name}.csv"
        write_csv(ds.table, path)
        manifest["datasets"].append(
            {
                "path": str(path),
                "name": ds.name,
                "family": ds.family,
                "target_column": ds.target_column,
                "independent_target": ds.independent_target,
            }
        )
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest
