"""Benchmark grid: injection + detection over datasets x mechanisms x rates.

Every grid cell gets its own seed derived by stable hashing of the cell
coordinates, so any cell can be reproduced standalone and the whole grid is
byte-identical across reruns, with or without the worker pool. Cell failures
(size gate, degenerate masks) become rejected rows instead of aborting.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from mechdetect.data import Table, load_csv
from mechdetect.detect import CvConfig, DataUnsuitableError, TrainSource, detect_mechanism
from mechdetect.perturb import Mechanism, MechanismSpec, Tail, default_conditioning_column, inject

DEFAULT_ERROR_RATES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class BenchmarkGrid:
    datasets: tuple[str, ...]
    mechanisms: tuple[Mechanism, ...] = (Mechanism.MCAR, Mechanism.MAR, Mechanism.MNAR)
    error_rates: tuple[float, ...] = DEFAULT_ERROR_RATES
    train_sources: tuple[TrainSource, ...] = (TrainSource.CLEAN,)
    repetitions: int = 1
    base_seed: int = 0
    columns: Mapping[str, tuple[str, ...]] | None = None  # default: every column
    alpha: float = 0.05
    n_folds: int = 10

    def __post_init__(self):
        if not self.datasets or not self.mechanisms or not self.error_rates or not self.train_sources:
            raise ValueError("grid lists must be non-empty")
        for r in self.error_rates:
            if not 0.0 < r < 1.0:
                raise ValueError(f"error rate {r} outside (0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass(frozen=True)
class BenchmarkReport:
    """Everything a grid run produced: per-cell records (rejected cells
    carry a `rejected` reason instead of a verdict) and the accuracy
    summary grouped by mechanism x rate x source."""

    rows: tuple[dict, ...]
    summary: tuple[dict, ...]

    @property
    def n_rejected(self) -> int:
        return sum(1 for r in self.rows if "rejected" in r)


@dataclass(frozen=True)
class GridCell:
    dataset: str
    column: str
    mechanism: Mechanism
    error_rate: float
    train_source: TrainSource
    repetition: int

    def sort_key(self):
        return (
            self.dataset,
            self.column,
            self.mechanism.value,
            self.error_rate,
            self.train_source.value,
            self.repetition,
        )


def _stable_hash(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:15], 16)


def cell_seed(base_seed: int, cell: GridCell, role: str) -> int:
    return _stable_hash(
        base_seed, role, cell.dataset, cell.column, cell.mechanism.value,
        cell.error_rate, cell.train_source.value, cell.repetition,
    )


def grid_from_config(config: Mapping) -> BenchmarkGrid:
    """Build a grid from a parsed JSON config dict."""
    columns = config.get("columns")
    return BenchmarkGrid(
        datasets=tuple(config["datasets"]),
        mechanisms=tuple(Mechanism(m) for m in config.get("mechanisms", ["mcar", "mar", "mnar"])),
        error_rates=tuple(config.get("error_rates", DEFAULT_ERROR_RATES)),
        train_sources=tuple(TrainSource(s) for s in config.get("train_sources", ["clean"])),
        repetitions=int(config.get("repetitions", 1)),
        base_seed=int(config.get("base_seed", 0)),
        columns={k: tuple(v) for k, v in columns.items()} if columns else None,
        alpha=float(config.get("alpha", 0.05)),
        n_folds=int(config.get("n_folds", 10)),
    )


_table_cache: dict[str, Table] = {}


def _load_table(path: str) -> Table:
    if path not in _table_cache:
        _table_cache[path] = load_csv(path)
    return _table_cache[path]


def expand_cells(grid: BenchmarkGrid) -> list[GridCell]:
    cells = []
    for ds in grid.datasets:
        if grid.columns and ds in grid.columns:
            col_names = grid.columns[ds]
        else:
            col_names = _load_table(ds).names
        for col in col_names:
            for mech in grid.mechanisms:
                for rate in grid.error_rates:
                    for source in grid.train_sources:
                        for rep in range(grid.repetitions):
                            cells.append(GridCell(ds, col, mech, rate, source, rep))
    return sorted(cells, key=GridCell.sort_key)


def run_cell(grid: BenchmarkGrid, cell: GridCell) -> dict:
    """Inject + detect one cell; returns the report row (never raises for
    data-unsuitable cells, which come back as rejected rows)."""
    row = {
        "dataset": cell.dataset,
        "column": cell.column,
        "mechanism": cell.mechanism.name,
        "error_rate": cell.error_rate,
        "train_source": cell.train_source.value,
        "repetition": cell.repetition,
    }
    inject_seed = cell_seed(grid.base_seed, cell, "inject")
    cv_seed = cell_seed(grid.base_seed, cell, "cv")
    shuffle_seed = cell_seed(grid.base_seed, cell, "shuffle")
    tail = Tail.LOWER if inject_seed % 2 == 0 else Tail.UPPER
    try:
        table = _load_table(cell.dataset)
        j = table.col_index(cell.column)
        conditioning = None
        if cell.mechanism is Mechanism.MAR:
            conditioning = default_conditioning_column(table, j)
        spec = MechanismSpec(
            mechanism=cell.mechanism,
            error_rate=cell.error_rate,
            target_column=j,
            conditioning_column=conditioning,
            tail=tail,
            seed=inject_seed,
        )
        result = inject(table, spec)
        detection = detect_mechanism(
            clean=table,
            perturbed=result.perturbed,
            mask=result.mask,
            j=j,
            alpha=grid.alpha,
            train_source=cell.train_source,
            cv=CvConfig(n_folds=grid.n_folds, seed=cv_seed),
            shuffle_seed=shuffle_seed,
        )
    except (DataUnsuitableError, ValueError, IndexError, KeyError, OSError) as exc:
        row["rejected"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        {
            "tail": tail.value,
            "conditioning_column": None if conditioning is None else table.names[conditioning],
            "verdict": detection.mechanism.name,
            "correct": detection.mechanism is cell.mechanism,
            "p1": detection.p1,
            "p2": detection.p2,
            "alpha": detection.alpha,
            "auc_complete": list(detection.auc_complete.scores),
            "auc_shuffled": list(detection.auc_shuffled.scores),
            "auc_excluded": list(detection.auc_excluded.scores),
            "seeds": {"inject": inject_seed, "cv": cv_seed, "shuffle": shuffle_seed},
        }
    )
    return row


def _run_cell_star(args):
    return run_cell(*args)


def summarize(rows: Iterable[dict]) -> list[dict]:
    """Per-(mechanism, rate, source) accuracy with a 95% normal CI."""
    groups: dict[tuple, list[bool]] = {}
    for row in rows:
        if "rejected" in row:
            continue
        key = (row["mechanism"], row["error_rate"], row["train_source"])
        groups.setdefault(key, []).append(bool(row["correct"]))
    out = []
    for key in sorted(groups):
        hits = groups[key]
        n = len(hits)
        acc = sum(hits) / n
        half = 1.96 * math.sqrt(acc * (1.0 - acc) / n)
        out.append(
            {
                "mechanism": key[0],
                "error_rate": key[1],
                "train_source": key[2],
                "n": n,
                "accuracy": acc,
                "ci_half_width": half,
            }
        )
    return out


def run_grid(grid: BenchmarkGrid, out_dir: str | Path, workers: int = 1) -> BenchmarkReport:
    """Execute every cell, write report.jsonl and summary.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(grid)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_star, [(grid, c) for c in cells], chunksize=1))
    else:
        rows = [run_cell(grid, c) for c in cells]

    with open(out_dir / "report.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    summary = summarize(rows)
    with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["mechanism", "error_rate", "train_source", "n", "accuracy", "ci_half_width"],
        )
        writer.writeheader()
        for entry in summary:
            writer.writerow(entry)
    return BenchmarkReport(rows=tuple(rows), summary=tuple(summary))
