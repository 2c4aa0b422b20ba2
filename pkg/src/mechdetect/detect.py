"""Orchestrate the two-step mechanism decision.

Three classifiers are trained to predict the error mask of column j: one on
the full table (Complete), one on the full table against a permuted mask
(Shuffled), one on the table without column j (Excluded). Each yields k
cross-validated AUC-ROC scores. Test 1 asks whether Complete beats Shuffled
(errors depend on data at all); test 2 asks whether Complete beats Excluded
(column j itself carries the signal). Both one-sided Mann-Whitney tests are
run before branching; the verdict compares each p-value against alpha/2.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from mechdetect.data import ErrorMask, MaskColumn, Table, drop_column, mask_column
from mechdetect.model import GbdtParams, fit, predict_scores
from mechdetect.perturb import Mechanism
from mechdetect.stats import AucSamples, Task, auc_roc, bonferroni_threshold, mwu_greater

MIN_ROWS = 40


class TrainSource(enum.Enum):
    CLEAN = "clean"
    PERTURBED = "perturbed"


class DataUnsuitableError(ValueError):
    """Input too small or degenerate for a meaningful verdict."""


@dataclass(frozen=True)
class TaskSpec:
    task: Task
    train_source: TrainSource
    target_column: int
    shuffle_seed: int = 0


@dataclass(frozen=True)
class CvConfig:
    n_folds: int = 10
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")


@dataclass(frozen=True)
class DetectionResult:
    mechanism: Mechanism
    p1: float
    p2: float | None
    alpha: float
    auc_complete: AucSamples
    auc_shuffled: AucSamples
    auc_excluded: AucSamples
    fingerprint: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "verdict": self.mechanism.name,
            "p1": self.p1,
            "p2": self.p2,
            "alpha": self.alpha,
            "auc_complete": list(self.auc_complete.scores),
            "auc_shuffled": list(self.auc_shuffled.scores),
            "auc_excluded": list(self.auc_excluded.scores),
            "seeds": self.fingerprint,
        }


def build_task(
    clean: Table | None,
    perturbed: Table | None,
    mask: ErrorMask,
    spec: TaskSpec,
) -> tuple[Table, MaskColumn]:
    """Training table and target for one of the three learning tasks."""
    source = clean if spec.train_source is TrainSource.CLEAN else perturbed
    if source is None:
        raise ValueError(f"train source {spec.train_source.value} table not provided")
    if mask.shape != (source.n_rows, source.n_cols):
        raise ValueError(
            f"mask shape {mask.shape} does not match table shape "
            f"{(source.n_rows, source.n_cols)}"
        )
    target = mask_column(mask, spec.target_column)
    n_err = target.error_count
    if n_err == 0 or n_err == len(target.bits):
        raise DataUnsuitableError(
            "mask column has a single class; the detector needs both error and "
            "non-error rows"
        )
    if spec.task is Task.COMPLETE:
        return source, target
    if spec.task is Task.SHUFFLED:
        permuted = np.random.default_rng(spec.shuffle_seed).permutation(target.bits)
        return source, MaskColumn(permuted, spec.target_column)
    return drop_column(source, spec.target_column), target


def _stratified_folds(bits: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per row; within each class, rows are shuffled and dealt
    round-robin so every fold gets an equal share of each class."""
    rng = np.random.default_rng(seed)
    fold = np.empty(len(bits), dtype=np.int64)
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(bits == cls))
        fold[idx] = np.arange(len(idx)) % n_folds
    return fold


def _plain_folds(n: int, n_folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fold = np.empty(n, dtype=np.int64)
    fold[rng.permutation(n)] = np.arange(n) % n_folds
    return fold


def cross_validated_auc(
    train: Table,
    target: MaskColumn,
    cv: CvConfig | None = None,
    params: GbdtParams | None = None,
    task: Task = Task.COMPLETE,
    fold_ids: np.ndarray | None = None,
) -> AucSamples:
    """One held-out AUC-ROC per fold, in fold order.

    When the minority class is smaller than n_folds, the fold count drops to
    the minority count (never below 2) so every held-out split keeps both
    classes.
    """
    cv = cv or CvConfig()
    params = params or GbdtParams()
    bits = target.bits
    minority = int(min(bits.sum(), len(bits) - bits.sum()))
    if minority < 2:
        raise DataUnsuitableError(
            f"minority class has {minority} rows; at least 2 are needed for CV"
        )
    n_folds = min(cv.n_folds, minority)
    if train.n_rows < 2 * n_folds:
        raise DataUnsuitableError(
            f"{train.n_rows} rows cannot support {n_folds}-fold CV"
        )
    if fold_ids is None:
        if cv.stratified:
            fold_ids = _stratified_folds(bits, n_folds, cv.seed)
        else:
            fold_ids = _plain_folds(len(bits), n_folds, cv.seed)

    scores = []
    for k in range(n_folds):
        test_rows = np.flatnonzero(fold_ids == k)
        train_rows = np.flatnonzero(fold_ids != k)
        y_train = bits[train_rows]
        if y_train.sum() == 0 or y_train.sum() == len(y_train):
            raise DataUnsuitableError(f"fold {k}: training split has a single class")
        y_test = bits[test_rows]
        if len(test_rows) == 0 or y_test.sum() == 0 or y_test.sum() == len(y_test):
            raise DataUnsuitableError(
                f"fold {k}: held-out split has a single class; stratified folds avoid this"
            )
        model = fit(
            train.take(train_rows),
            MaskColumn(y_train, target.source_column),
            params,
        )
        held_out = predict_scores(model, train.take(test_rows))
        scores.append(auc_roc(held_out, bits[test_rows]))
    return AucSamples(task=task, scores=tuple(scores))


def detect_mechanism(
    clean: Table | None,
    perturbed: Table | None,
    mask: ErrorMask,
    j: int,
    alpha: float = 0.05,
    train_source: TrainSource = TrainSource.CLEAN,
    cv: CvConfig | None = None,
    params: GbdtParams | None = None,
    shuffle_seed: int | None = None,
) -> DetectionResult:
    """Run the three tasks and the two tests; return the verdict and p-values."""
    cv = cv or CvConfig()
    params = params or GbdtParams()
    if shuffle_seed is None:
        shuffle_seed = cv.seed + 0x5F5E1

    source = clean if train_source is TrainSource.CLEAN else perturbed
    if source is None:
        raise ValueError(f"train source {train_source.value} table not provided")
    if source.n_rows < MIN_ROWS:
        raise DataUnsuitableError(
            f"{source.n_rows} rows < minimum {MIN_ROWS}; verdicts on tiny inputs are noise"
        )
    target = mask_column(mask, j)
    minority = int(min(target.error_count, source.n_rows - target.error_count))
    if minority < cv.n_folds:
        raise DataUnsuitableError(
            f"minority mask class has {minority} rows, below the fold count {cv.n_folds}"
        )

    specs = {
        task: TaskSpec(task, train_source, j, shuffle_seed)
        for task in (Task.COMPLETE, Task.SHUFFLED, Task.EXCLUDED)
    }
    # Complete and Excluded share one fold assignment (identical target);
    # Shuffled stratifies on its own permuted target.
    shared_folds = _stratified_folds(target.bits, cv.n_folds, cv.seed) if cv.stratified else None

    samples = {}
    for task in (Task.COMPLETE, Task.SHUFFLED, Task.EXCLUDED):
        train, task_target = build_task(clean, perturbed, mask, specs[task])
        fold_ids = shared_folds if task is not Task.SHUFFLED else None
        samples[task] = cross_validated_auc(
            train, task_target, cv, params, task=task, fold_ids=fold_ids
        )

    p1 = mwu_greater(samples[Task.COMPLETE], samples[Task.SHUFFLED]).p_value
    p2 = mwu_greater(samples[Task.COMPLETE], samples[Task.EXCLUDED]).p_value
    threshold = bonferroni_threshold(alpha, 2)
    if p1 < threshold:
        mechanism = Mechanism.MNAR if p2 < threshold else Mechanism.MAR
        p2_reported = p2
    else:
        mechanism = Mechanism.MCAR
        p2_reported = None

    fingerprint = {
        "cv_seed": cv.seed,
        "shuffle_seed": shuffle_seed,
        "n_folds": cv.n_folds,
        "train_source": train_source.value,
        "target_column": j,
        "gbdt": asdict(params),
    }
    return DetectionResult(
        mechanism=mechanism,
        p1=p1,
        p2=p2_reported,
        alpha=alpha,
        auc_complete=samples[Task.COMPLETE],
        auc_shuffled=samples[Task.SHUFFLED],
        auc_excluded=samples[Task.EXCLUDED],
        fingerprint=fingerprint,
    )


def detection_accuracy(results) -> float:
    """Fraction of (DetectionResult, true Mechanism) pairs that agree."""
    results = list(results)
    if not results:
        raise ValueError("need at least one result")
    hits = sum(1 for res, truth in results if res.mechanism is truth)
    return hits / len(results)
