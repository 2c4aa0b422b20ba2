"""CLI surface: file outputs, exit codes, and grid determinism."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from mechdetect.benchmark import (
    BenchmarkGrid,
    GridCell,
    cell_seed,
    expand_cells,
    run_cell,
    run_grid,
    summarize,
)
from mechdetect.cli import main
from mechdetect.data import Column, ColumnKind, Table, load_mask, write_csv
from mechdetect.detect import TrainSource
from mechdetect.perturb import Mechanism


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def clean_csv(tmp_path_factory):
    rng = np.random.default_rng(55)
    cols = tuple(
        Column(f"x{i}", ColumnKind.NUMERIC, rng.normal(size=300)) for i in range(4)
    )
    path = tmp_path_factory.mktemp("cli") / "clean.csv"
    write_csv(Table(cols), path)
    return path


@pytest.fixture(scope="module")
def tiny_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "tiny.csv"
    path.write_text(
        "a,b\n" + "".join(f"{i},{i * 2}\n" for i in range(10)), encoding="utf-8"
    )
    return path


class TestInject:
    def test_writes_three_files_with_exact_budget(self, runner, clean_csv, tmp_path):
        prefix = tmp_path / "out"
        result = runner.invoke(
            main,
            ["inject", "--input", str(clean_csv), "--column", "x1",
             "--mechanism", "mcar", "--rate", "0.1", "--seed", "3",
             "--out-prefix", str(prefix)],
        )
        assert result.exit_code == 0, result.output
        mask = load_mask(f"{prefix}.mask.txt")
        assert mask.bits[:, 1].sum() == 30  # floor(0.1 * 300)
        assert mask.bits.sum() == 30
        spec = json.loads((tmp_path / "out.spec.json").read_text())
        assert spec["error_count"] == 30 and spec["seed"] == 3

    def test_same_seed_byte_identical_masks(self, runner, clean_csv, tmp_path):
        args = ["inject", "--input", str(clean_csv), "--column", "x0",
                "--mechanism", "mnar", "--rate", "0.25", "--seed", "8"]
        runner.invoke(main, args + ["--out-prefix", str(tmp_path / "a")])
        runner.invoke(main, args + ["--out-prefix", str(tmp_path / "b")])
        assert (tmp_path / "a.mask.txt").read_bytes() == (tmp_path / "b.mask.txt").read_bytes()

    def test_rate_out_of_range_is_usage_error(self, runner, clean_csv, tmp_path):
        result = runner.invoke(
            main,
            ["inject", "--input", str(clean_csv), "--column", "x0",
             "--mechanism", "mcar", "--rate", "1.5", "--out-prefix", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_missing_input_file_exit_2(self, runner, tmp_path):
        result = runner.invoke(
            main,
            ["inject", "--input", str(tmp_path / "ghost.csv"), "--column", "a",
             "--mechanism", "mcar", "--rate", "0.5", "--out-prefix", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_zero_budget_exit_3(self, runner, tiny_csv, tmp_path):
        result = runner.invoke(
            main,
            ["inject", "--input", str(tiny_csv), "--column", "a",
             "--mechanism", "mcar", "--rate", "0.05", "--out-prefix", str(tmp_path / "o")],
        )
        assert result.exit_code == 3

    def test_unknown_column_exit_2(self, runner, clean_csv, tmp_path):
        result = runner.invoke(
            main,
            ["inject", "--input", str(clean_csv), "--column", "nope",
             "--mechanism", "mcar", "--rate", "0.5", "--out-prefix", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_mar_records_default_conditioning(self, runner, clean_csv, tmp_path):
        prefix = tmp_path / "mar"
        result = runner.invoke(
            main,
            ["inject", "--input", str(clean_csv), "--column", "x2",
             "--mechanism", "mar", "--rate", "0.5", "--seed", "1",
             "--out-prefix", str(prefix)],
        )
        assert result.exit_code == 0, result.output
        spec = json.loads((tmp_path / "mar.spec.json").read_text())
        assert spec["conditioning_column"] in {"x0", "x1", "x3"}


@pytest.fixture(scope="module")
def mnar_files(tmp_path_factory):
    runner = CliRunner()
    rng = np.random.default_rng(77)
    cols = tuple(
        Column(f"x{i}", ColumnKind.NUMERIC, rng.normal(size=300)) for i in range(4)
    )
    d = tmp_path_factory.mktemp("detect")
    clean = d / "clean.csv"
    write_csv(Table(cols), clean)
    prefix = d / "mnar"
    res = runner.invoke(
        main,
        ["inject", "--input", str(clean), "--column", "x1",
         "--mechanism", "mnar", "--rate", "0.5", "--seed", "5",
         "--out-prefix", str(prefix)],
    )
    assert res.exit_code == 0, res.output
    return clean, f"{prefix}.perturbed.csv", f"{prefix}.mask.txt"


class TestDetectCommand:

    def test_mnar_fixture_detected(self, runner, mnar_files):
        clean, perturbed, mask = mnar_files
        result = runner.invoke(
            main,
            ["detect", "--clean", str(clean), "--perturbed", perturbed,
             "--mask", mask, "--column", "x1", "--seed", "2"],
        )
        assert result.exit_code == 0, result.output
        record = json.loads(result.output)
        assert record["verdict"] == "MNAR"
        assert record["p1"] < 0.025 and record["p2"] < 0.025
        assert len(record["auc_complete"]) == 10

    def test_mcar_fixture_reports_null_p2(self, runner, tmp_path, clean_csv):
        prefix = tmp_path / "mcar"
        runner.invoke(
            main,
            ["inject", "--input", str(clean_csv), "--column", "x1",
             "--mechanism", "mcar", "--rate", "0.5", "--seed", "6",
             "--out-prefix", str(prefix)],
        )
        result = runner.invoke(
            main,
            ["detect", "--clean", str(clean_csv), "--perturbed", f"{prefix}.perturbed.csv",
             "--mask", f"{prefix}.mask.txt", "--column", "x1", "--seed", "2"],
        )
        assert result.exit_code == 0, result.output
        record = json.loads(result.output)
        assert record["verdict"] == "MCAR"
        assert record["p2"] is None

    def test_missing_mask_file_exit_2(self, runner, mnar_files):
        clean, perturbed, _ = mnar_files
        result = runner.invoke(
            main,
            ["detect", "--clean", str(clean), "--perturbed", perturbed,
             "--mask", "/nonexistent/mask.txt", "--column", "x1"],
        )
        assert result.exit_code == 2

    def test_clean_required_for_clean_source(self, runner, mnar_files):
        _, perturbed, mask = mnar_files
        result = runner.invoke(
            main, ["detect", "--perturbed", perturbed, "--mask", mask, "--column", "x1"]
        )
        assert result.exit_code == 2

    def test_perturbed_source_needs_no_clean(self, runner, mnar_files):
        _, perturbed, mask = mnar_files
        result = runner.invoke(
            main,
            ["detect", "--perturbed", perturbed, "--mask", mask, "--column", "x1",
             "--train-source", "perturbed", "--seed", "2"],
        )
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["verdict"] == "MNAR"

    def test_small_data_exit_3(self, runner, tiny_csv, tmp_path):
        # 10 rows passes injection (rate 0.5 -> 5 errors) but fails the size gate
        prefix = tmp_path / "tiny"
        res = runner.invoke(
            main,
            ["inject", "--input", str(tiny_csv), "--column", "a",
             "--mechanism", "mcar", "--rate", "0.5", "--seed", "1",
             "--out-prefix", str(prefix)],
        )
        assert res.exit_code == 0
        result = runner.invoke(
            main,
            ["detect", "--clean", str(tiny_csv), "--perturbed", f"{prefix}.perturbed.csv",
             "--mask", f"{prefix}.mask.txt", "--column", "a"],
        )
        assert result.exit_code == 3


@pytest.fixture(scope="module")
def grid_config(tmp_path_factory):
    rng = np.random.default_rng(99)
    d = tmp_path_factory.mktemp("bench")
    cols = tuple(
        Column(f"x{i}", ColumnKind.NUMERIC, rng.normal(size=250)) for i in range(3)
    )
    ds = d / "ds.csv"
    write_csv(Table(cols), ds)
    config = {
        "datasets": [str(ds)],
        "columns": {str(ds): ["x1"]},
        "mechanisms": ["mcar", "mnar"],
        "error_rates": [0.5],
        "train_sources": ["clean"],
        "repetitions": 1,
        "base_seed": 424242,
        "n_folds": 10,
    }
    cfg = d / "grid.json"
    cfg.write_text(json.dumps(config), encoding="utf-8")
    return cfg, d


class TestBenchmark:

    def test_grid_runs_and_reports(self, runner, grid_config):
        cfg, d = grid_config
        out = d / "run1"
        result = runner.invoke(main, ["benchmark", "--config", str(cfg), "--out-dir", str(out)])
        assert result.exit_code == 0, result.output
        rows = [json.loads(l) for l in (out / "report.jsonl").read_text().splitlines()]
        assert len(rows) == 2
        assert all("verdict" in r for r in rows)
        summary = (out / "summary.csv").read_text().splitlines()
        assert summary[0] == "mechanism,error_rate,train_source,n,accuracy,ci_half_width"
        assert len(summary) == 3

    def test_rerun_is_byte_identical(self, runner, grid_config):
        cfg, d = grid_config
        a, b = d / "run_a", d / "run_b"
        assert runner.invoke(main, ["benchmark", "--config", str(cfg), "--out-dir", str(a)]).exit_code == 0
        assert runner.invoke(main, ["benchmark", "--config", str(cfg), "--out-dir", str(b)]).exit_code == 0
        assert (a / "report.jsonl").read_bytes() == (b / "report.jsonl").read_bytes()
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()

    def test_bad_config_exit_2(self, runner, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{\"mechanisms\": []}", encoding="utf-8")
        result = runner.invoke(
            main, ["benchmark", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]
        )
        assert result.exit_code == 2


class TestGridMachinery:
    def test_cell_seeds_are_collision_free(self):
        grid = BenchmarkGrid(
            datasets=("a.csv", "b.csv"),
            columns={"a.csv": ("c1", "c2"), "b.csv": ("c1",)},
            repetitions=3,
            base_seed=7,
        )
        cells = expand_cells(grid)
        seeds = [cell_seed(grid.base_seed, c, "inject") for c in cells]
        assert len(cells) == 3 * 3 * 5 * 3  # columns x mechanisms x rates x reps
        assert len(set(seeds)) == len(seeds)
        # roles never collide either
        assert not set(seeds) & {cell_seed(grid.base_seed, c, "cv") for c in cells}

    def test_summary_matches_row_accuracy(self):
        rows = [
            {"mechanism": "MCAR", "error_rate": 0.5, "train_source": "clean", "correct": True},
            {"mechanism": "MCAR", "error_rate": 0.5, "train_source": "clean", "correct": False},
            {"mechanism": "MNAR", "error_rate": 0.5, "train_source": "clean", "correct": True},
            {"mechanism": "MNAR", "error_rate": 0.5, "train_source": "clean", "rejected": "too small"},
        ]
        summary = {(s["mechanism"], s["error_rate"]): s for s in summarize(rows)}
        assert summary[("MCAR", 0.5)]["accuracy"] == 0.5
        assert summary[("MCAR", 0.5)]["n"] == 2
        assert summary[("MNAR", 0.5)]["accuracy"] == 1.0
        assert summary[("MNAR", 0.5)]["n"] == 1

    def test_rejected_cells_recorded_not_raised(self, tmp_path):
        path = tmp_path / "small.csv"
        path.write_text("a,b\n" + "".join(f"{i},{i}\n" for i in range(20)), encoding="utf-8")
        grid = BenchmarkGrid(datasets=(str(path),), error_rates=(0.5,), base_seed=1)
        report = run_grid(grid, tmp_path / "out")
        assert all("rejected" in r for r in report.rows)
        assert report.n_rejected == len(report.rows)

    def test_standalone_cell_reproduction(self, tmp_path):
        rng = np.random.default_rng(123)
        cols = tuple(
            Column(f"x{i}", ColumnKind.NUMERIC, rng.normal(size=250)) for i in range(3)
        )
        ds = tmp_path / "ds.csv"
        write_csv(Table(cols), ds)
        grid = BenchmarkGrid(
            datasets=(str(ds),),
            columns={str(ds): ("x0",)},
            mechanisms=(Mechanism.MNAR,),
            error_rates=(0.5,),
            base_seed=31337,
        )
        report = run_grid(grid, tmp_path / "out")
        cell = GridCell(str(ds), "x0", Mechanism.MNAR, 0.5, TrainSource.CLEAN, 0)
        again = run_cell(grid, cell)
        assert json.dumps(again, sort_keys=True) == json.dumps(report.rows[0], sort_keys=True)
