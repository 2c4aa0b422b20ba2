"""mechdetect: decide whether errors in a tabular dataset are MCAR, MAR or MNAR.

Given a table and a per-cell error mask, the detector trains gradient-boosted
tree classifiers on three task variants of "predict the mask of column j",
compares the cross-validated AUC-ROC distributions with one-sided
Mann-Whitney-U tests, and applies a two-step decision rule.
"""

from mechdetect.data import (
    Column,
    ColumnKind,
    ErrorMask,
    MaskColumn,
    Table,
    drop_column,
    load_csv,
    load_mask,
    mask_column,
    mask_from_missing,
    save_mask,
    write_csv,
)
from mechdetect.detect import (
    CvConfig,
    DetectionResult,
    TaskSpec,
    TrainSource,
    build_task,
    cross_validated_auc,
    detect_mechanism,
    detection_accuracy,
)
from mechdetect.model import GbdtParams, TrainedModel, fit, predict_scores
from mechdetect.perturb import (
    Mechanism,
    MechanismSpec,
    PerturbationResult,
    Tail,
    default_conditioning_column,
    inject,
    inject_mar,
    inject_mcar,
    inject_mnar,
)
from mechdetect.stats import (
    AucSamples,
    MwuMethod,
    MwuResult,
    Task,
    auc_roc,
    bonferroni_threshold,
    mwu_greater,
)

__version__ = "0.1.0"

__all__ = [
    "AucSamples",
    "Column",
    "ColumnKind",
    "CvConfig",
    "DetectionResult",
    "ErrorMask",
    "GbdtParams",
    "MaskColumn",
    "Mechanism",
    "MechanismSpec",
    "MwuMethod",
    "MwuResult",
    "PerturbationResult",
    "Table",
    "Tail",
    "Task",
    "TaskSpec",
    "TrainSource",
    "TrainedModel",
    "auc_roc",
    "bonferroni_threshold",
    "build_task",
    "cross_validated_auc",
    "default_conditioning_column",
    "detect_mechanism",
    "detection_accuracy",
    "drop_column",
    "fit",
    "inject",
    "inject_mar",
    "inject_mcar",
    "inject_mnar",
    "load_csv",
    "load_mask",
    "mask_column",
    "mask_from_missing",
    "mwu_greater",
    "predict_scores",
    "save_mask",
    "write_csv",
]
