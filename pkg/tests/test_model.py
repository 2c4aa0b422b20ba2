"""Contracts of the boosted-tree learner: learnability, chance level,
null routing, binning invariance, determinism."""

import numpy as np
import pytest

from mechdetect.data import Column, ColumnKind, MaskColumn, Table
from mechdetect.model import GbdtParams, fit, predict_proba, predict_scores
from mechdetect.stats import auc_roc


def numeric_table(arrays, names=None):
    names = names or [f"x{i}" for i in range(len(arrays))]
    return Table(
        tuple(
            Column(n, ColumnKind.NUMERIC, np.asarray(a, dtype=np.float64))
            for n, a in zip(names, arrays)
        )
    )


def split_rows(n, frac, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    cut = int(n * frac)
    return perm[:cut], perm[cut:]


class TestParams:
    def test_defaults(self):
        p = GbdtParams()
        assert (p.n_iterations, p.learning_rate, p.max_leaves) == (100, 0.1, 31)
        assert (p.min_samples_leaf, p.max_bins, p.l2_regularization) == (20, 255, 0.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_iterations": 0},
            {"learning_rate": 0.0},
            {"max_leaves": 1},
            {"max_bins": 1},
            {"max_bins": 256},
            {"min_samples_leaf": 0},
            {"l2_regularization": -1.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            GbdtParams(**kwargs)


class TestLearnability:
    def test_copy_of_binary_feature_reaches_training_auc_one(self):
        rng = np.random.default_rng(0)
        flag = rng.integers(0, 2, size=400).astype(np.float64)
        t = numeric_table([flag, rng.normal(size=400)])
        target = MaskColumn(flag.astype(np.uint8), 0)
        model = fit(t, target, GbdtParams(n_iterations=10, min_samples_leaf=5))
        assert auc_roc(predict_scores(model, t), target.bits) == 1.0

    def test_random_target_stays_at_chance_held_out(self):
        rng = np.random.default_rng(1)
        aucs = []
        for seed in range(20):
            r = np.random.default_rng(seed)
            t = numeric_table([r.normal(size=300) for _ in range(4)])
            y = r.integers(0, 2, size=300).astype(np.uint8)
            tr, te = split_rows(300, 0.7, seed)
            model = fit(t.take(tr), MaskColumn(y[tr], 0), GbdtParams(n_iterations=30))
            aucs.append(auc_roc(predict_scores(model, t.take(te)), y[te]))
        assert 0.4 <= np.mean(aucs) <= 0.6

    def test_single_threshold_target_generalizes(self):
        rng = np.random.default_rng(2)
        x1 = rng.normal(size=600)
        t = numeric_table([rng.normal(size=600), x1, rng.normal(size=600)])
        y = (x1 > np.median(x1)).astype(np.uint8)
        tr, te = split_rows(600, 0.75, 3)
        model = fit(t.take(tr), MaskColumn(y[tr], 1))
        assert auc_roc(predict_scores(model, t.take(te)), y[te]) > 0.95

    def test_categorical_subset_target(self):
        rng = np.random.default_rng(4)
        codes = rng.integers(0, 6, size=500).astype(np.int32)
        cat = Column("c", ColumnKind.CATEGORICAL, codes, tuple("abcdef"))
        t = Table((cat, Column("z", ColumnKind.NUMERIC, rng.normal(size=500))))
        y = np.isin(codes, [1, 4]).astype(np.uint8)
        tr, te = split_rows(500, 0.75, 5)
        model = fit(t.take(tr), MaskColumn(y[tr], 0))
        assert auc_roc(predict_scores(model, t.take(te)), y[te]) > 0.95


class TestTrainingDynamics:
    def test_loss_non_increasing_each_iteration(self):
        rng = np.random.default_rng(6)
        t = numeric_table([rng.normal(size=500) for _ in range(3)])
        y = (t.column(0).values + rng.normal(scale=0.5, size=500) > 0).astype(np.uint8)
        model = fit(t, MaskColumn(y, 0))
        losses = model.train_losses
        assert len(losses) >= 2
        for earlier, later in zip(losses, losses[1:]):
            assert later <= earlier + 1e-12

    def test_noise_target_loss_also_non_increasing(self):
        rng = np.random.default_rng(7)
        t = numeric_table([rng.normal(size=400) for _ in range(4)])
        y = rng.integers(0, 2, size=400).astype(np.uint8)
        model = fit(t, MaskColumn(y, 0))
        for earlier, later in zip(model.train_losses, model.train_losses[1:]):
            assert later <= earlier + 1e-12

    def test_deterministic_predictions(self):
        rng = np.random.default_rng(8)
        t = numeric_table([rng.normal(size=300) for _ in range(5)])
        y = (t.column(2).values > 0.3).astype(np.uint8)
        target = MaskColumn(y, 2)
        a = predict_scores(fit(t, target), t)
        b = predict_scores(fit(t, target), t)
        np.testing.assert_array_equal(a, b)

    def test_binning_invariance_under_monotone_transforms(self):
        rng = np.random.default_rng(9)
        base = rng.normal(size=400)
        other = rng.normal(size=400)
        y = ((base > -0.2) & (other < 0.8)).astype(np.uint8)
        target = MaskColumn(y, 0)
        t0 = numeric_table([base, other])
        ref = predict_scores(fit(t0, target), t0)
        for transform in (lambda v: 3.0 * v + 11.0, lambda v: np.exp(v / 4.0)):
            tt = numeric_table([transform(base), other])
            out = predict_scores(fit(tt, target), tt)
            np.testing.assert_allclose(out, ref, atol=1e-9)


class TestNullRouting:
    def test_nulls_perfectly_predict_target(self):
        rng = np.random.default_rng(10)
        vals = rng.normal(size=300)
        y = rng.integers(0, 2, size=300).astype(np.uint8)
        vals[y == 1] = np.nan  # missingness IS the signal
        t = Table(
            (
                Column("gappy", ColumnKind.NUMERIC, vals),
                Column("noise", ColumnKind.NUMERIC, rng.normal(size=300)),
            )
        )
        model = fit(t, MaskColumn(y, 0), GbdtParams(n_iterations=10))
        assert auc_roc(predict_scores(model, t), y) == 1.0

    def test_unseen_category_routes_like_null(self):
        rng = np.random.default_rng(11)
        codes = rng.integers(0, 3, size=200).astype(np.int32)
        t = Table(
            (
                Column("c", ColumnKind.CATEGORICAL, codes, ("a", "b", "c")),
                Column("z", ColumnKind.NUMERIC, rng.normal(size=200)),
            )
        )
        y = (codes == 1).astype(np.uint8)
        model = fit(t, MaskColumn(y, 0), GbdtParams(n_iterations=5, min_samples_leaf=5))
        # same rows, but the dictionary now contains a label the model never saw
        new_codes = np.full(4, 3, dtype=np.int32)
        null_codes = np.full(4, -1, dtype=np.int32)
        zs = np.zeros(4)
        t_new = Table(
            (
                Column("c", ColumnKind.CATEGORICAL, new_codes, ("a", "b", "c", "NEW")),
                Column("z", ColumnKind.NUMERIC, zs),
            )
        )
        t_null = Table(
            (
                Column("c", ColumnKind.CATEGORICAL, null_codes, ("a", "b", "c", "NEW")),
                Column("z", ColumnKind.NUMERIC, zs),
            )
        )
        np.testing.assert_array_equal(
            predict_scores(model, t_new), predict_scores(model, t_null)
        )


class TestDegenerateInputs:
    def test_all_constant_features_fall_back_to_base_rate(self):
        y = np.array([0, 1] * 50, dtype=np.uint8)
        t = numeric_table([np.full(100, 3.0), np.full(100, -1.0)])
        model = fit(t, MaskColumn(y, 0))
        scores = predict_scores(model, t)
        np.testing.assert_array_equal(scores, np.full(100, model.initial_score))
        assert model.initial_score == pytest.approx(0.0)  # balanced classes

    def test_single_class_target_rejected(self):
        t = numeric_table([np.arange(50.0)], names=["a"])
        t = Table(t.columns + (Column("b", ColumnKind.NUMERIC, np.arange(50.0)),))
        with pytest.raises(ValueError):
            fit(t, MaskColumn(np.zeros(50, dtype=np.uint8), 0))

    def test_empty_table_rejected(self):
        t = numeric_table([np.array([]), np.array([])])
        with pytest.raises(ValueError):
            fit(t, MaskColumn(np.array([], dtype=np.uint8), 0))

    def test_length_mismatch_rejected(self):
        t = numeric_table([np.arange(10.0), np.arange(10.0)])
        with pytest.raises(ValueError):
            fit(t, MaskColumn(np.array([0, 1], dtype=np.uint8), 0))

    def test_schema_mismatch_at_predict(self):
        rng = np.random.default_rng(12)
        t = numeric_table([rng.normal(size=100), rng.normal(size=100)])
        y = (t.column(0).values > 0).astype(np.uint8)
        model = fit(t, MaskColumn(y, 0), GbdtParams(n_iterations=3))
        other = numeric_table([rng.normal(size=5)], names=["x0"])
        other = Table(
            (other.columns[0], Column("renamed", ColumnKind.NUMERIC, np.zeros(5)))
        )
        with pytest.raises(ValueError):
            predict_scores(model, other)


class TestScoresAndProbabilities:
    def test_probabilities_are_sigmoid_of_scores(self):
        rng = np.random.default_rng(13)
        t = numeric_table([rng.normal(size=200), rng.normal(size=200)])
        y = (t.column(0).values > 0.5).astype(np.uint8)
        model = fit(t, MaskColumn(y, 0), GbdtParams(n_iterations=20))
        probs = predict_proba(model, t)
        scores = predict_scores(model, t)
        assert np.all((probs >= 0.0) & (probs <= 1.0))
        order = np.argsort(scores)
        assert np.all(np.diff(probs[order]) >= -1e-15)  # monotone transform

    def test_initial_score_is_base_rate_log_odds(self):
        rng = np.random.default_rng(14)
        t = numeric_table([rng.normal(size=200), rng.normal(size=200)])
        y = np.zeros(200, dtype=np.uint8)
        y[:40] = 1
        model = fit(t, MaskColumn(y, 0), GbdtParams(n_iterations=1))
        assert model.initial_score == pytest.approx(np.log(0.2 / 0.8))
