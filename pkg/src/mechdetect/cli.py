"""Command-line entry points: inject errors, detect a mechanism, run a grid.

Exit codes: 0 on success (any verdict counts), 2 for usage and I/O problems,
3 when the data cannot support a meaningful verdict (size gate, degenerate
mask, zero error budget).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from mechdetect import benchmark as bench
from mechdetect.data import (
    CsvFormatError,
    MaskFormatError,
    load_csv,
    load_mask,
    save_mask,
    write_csv,
)
from mechdetect.detect import CvConfig, DataUnsuitableError, TrainSource, detect_mechanism
from mechdetect.perturb import Mechanism, MechanismSpec, Tail, default_conditioning_column, inject

EXIT_IO = 2
EXIT_UNSUITABLE = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Detect whether tabular errors are MCAR, MAR or MNAR."""


@main.command("inject")
@click.option("--input", "input_path", required=True, type=click.Path(), help="clean CSV")
@click.option("--column", required=True, help="target column name")
@click.option("--mechanism", required=True, type=click.Choice(["mcar", "mar", "mnar"]))
@click.option("--rate", required=True, type=click.FloatRange(0, 1, min_open=True, max_open=True))
@click.option("--cond-column", default=None, help="MAR conditioning column (default: most distinct)")
@click.option("--tail", type=click.Choice(["lower", "upper"]), default="upper", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-prefix", required=True, help="writes PREFIX.perturbed.csv/.mask.txt/.spec.json")
def cmd_inject(input_path, column, mechanism, rate, cond_column, tail, seed, out_prefix):
    """Erase cells of one column under the chosen mechanism."""
    try:
        table = load_csv(input_path)
        j = table.col_index(column)
        conditioning = None
        if mechanism == "mar":
            conditioning = (
                table.col_index(cond_column) if cond_column else default_conditioning_column(table, j)
            )
        elif cond_column:
            raise click.UsageError("--cond-column only applies to --mechanism mar")
        spec = MechanismSpec(
            mechanism=Mechanism(mechanism),
            error_rate=rate,
            target_column=j,
            conditioning_column=conditioning,
            tail=Tail(tail),
            seed=seed,
        )
        result = inject(table, spec)
    except (OSError, CsvFormatError) as exc:
        _fail(EXIT_IO, str(exc))
    except KeyError as exc:
        _fail(EXIT_IO, f"unknown column: {exc}")
    except ValueError as exc:
        _fail(EXIT_UNSUITABLE, str(exc))

    prefix = Path(out_prefix)
    write_csv(result.perturbed, f"{prefix}.perturbed.csv")
    save_mask(result.mask, f"{prefix}.mask.txt")
    record = {
        "input": str(input_path),
        "column": column,
        "column_index": j,
        "mechanism": mechanism,
        "error_rate": rate,
        "conditioning_column": None if conditioning is None else table.names[conditioning],
        "tail": tail,
        "seed": seed,
        "n_rows": table.n_rows,
        "error_count": int(result.mask.bits.sum()),
    }
    with open(f"{prefix}.spec.json", "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {prefix}.perturbed.csv, {prefix}.mask.txt, {prefix}.spec.json")


@main.command("detect")
@click.option("--clean", "clean_path", type=click.Path(), default=None,
              help="clean CSV (optional when --train-source=perturbed)")
@click.option("--perturbed", "perturbed_path", required=True, type=click.Path())
@click.option("--mask", "mask_path", required=True, type=click.Path())
@click.option("--column", required=True, help="target column name")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--train-source", type=click.Choice(["clean", "perturbed"]),
              default="clean", show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_detect(clean_path, perturbed_path, mask_path, column, alpha, train_source, folds, seed):
    """Print the detected mechanism and p-values as one JSON record."""
    source = TrainSource(train_source)
    if source is TrainSource.CLEAN and clean_path is None:
        raise click.UsageError("--clean is required when --train-source=clean")
    try:
        clean = load_csv(clean_path) if clean_path else None
        perturbed = load_csv(perturbed_path)
        mask = load_mask(mask_path)
        ref = clean if source is TrainSource.CLEAN else perturbed
        j = ref.col_index(column)
        result = detect_mechanism(
            clean=clean,
            perturbed=perturbed,
            mask=mask,
            j=j,
            alpha=alpha,
            train_source=source,
            cv=CvConfig(n_folds=folds, seed=seed),
        )
    except (OSError, CsvFormatError, MaskFormatError) as exc:
        _fail(EXIT_IO, str(exc))
    except KeyError as exc:
        _fail(EXIT_IO, f"unknown column: {exc}")
    except DataUnsuitableError as exc:
        _fail(EXIT_UNSUITABLE, str(exc))
    except ValueError as exc:
        _fail(EXIT_IO, str(exc))

    record = {"dataset": str(clean_path or perturbed_path), "column": column,
              "train_source": train_source}
    record.update(result.to_record())
    click.echo(json.dumps(record, sort_keys=True))


@main.command("benchmark")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--workers", type=int, default=1, show_default=True)
def cmd_benchmark(config_path, out_dir, workers):
    """Run the full injection + detection grid from a JSON config."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        grid = bench.grid_from_config(config)
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        _fail(EXIT_IO, f"bad grid config: {exc}")
    report = bench.run_grid(grid, out_dir, workers=workers)
    click.echo(f"{len(report.rows) - report.n_rejected} cells completed, "
               f"{report.n_rejected} rejected; "
               f"report in {out_dir}/report.jsonl, summary in {out_dir}/summary.csv")


if __name__ == "__main__":
    main()
