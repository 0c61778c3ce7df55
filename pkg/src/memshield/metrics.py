"""Confusion matrices, the four headline metrics and stratified
cross-validation. Malware is the positive class.

Zero-denominator conventions: precision with no positive predictions is 1.0
when nothing was missed (fn == 0) and 0.0 otherwise; recall with no actual
positives is 1.0; F1 with precision + recall == 0 is 0.0.
"""

from dataclasses import dataclass, replace

import numpy as np

from .baselines import BaselineKind, fit_baseline
from .dataset import Dataset
from .forest import ForestParams, fit_forest
from .seeding import ROLE_CV_FOLD, derive_seed
from .splits import stratified_kfold


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_matrix(predictions, truths) -> ConfusionMatrix:
    preds = np.asarray(predictions)
    truth = np.asarray(truths)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise ValueError(f"length mismatch: predictions {preds.shape} vs truths {truth.shape}")
    if preds.size == 0:
        raise ValueError("need at least one prediction")
    preds = preds.astype(bool)
    truth = truth.astype(bool)
    return ConfusionMatrix(
        tp=int((preds & truth).sum()),
        fp=int((preds & ~truth).sum()),
        tn=int((~preds & ~truth).sum()),
        fn=int((~preds & truth).sum()),
    )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricReport:
    """Headline precision/recall/f1 are for the malware (positive) class;
    per-class and support-weighted variants ride along."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: dict[str, ClassMetrics]
    weighted: ClassMetrics


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float]:
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
    return precision, recall


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(cm: ConfusionMatrix) -> MetricReport:
    total = cm.total
    if total == 0:
        raise ValueError("empty confusion matrix")
    p_mal, r_mal = _prf(cm.tp, cm.fp, cm.fn)
    # benign side: predicted-benign errors mirror the malware quadrants
    p_ben, r_ben = _prf(cm.tn, cm.fn, cm.fp)
    malware = ClassMetrics(p_mal, r_mal, _f1(p_mal, r_mal), cm.tp + cm.fn)
    benign = ClassMetrics(p_ben, r_ben, _f1(p_ben, r_ben), cm.tn + cm.fp)
    weighted = ClassMetrics(
        (benign.support * benign.precision + malware.support * malware.precision) / total,
        (benign.support * benign.recall + malware.support * malware.recall) / total,
        (benign.support * benign.f1 + malware.support * malware.f1) / total,
        total,
    )
    return MetricReport(
        accuracy=(cm.tp + cm.tn) / total,
        precision=malware.precision,
        recall=malware.recall,
        f1=malware.f1,
        per_class={"benign": benign, "malware": malware},
        weighted=weighted,
    )


def evaluate(model, test: Dataset, hard_vote: bool = False) -> tuple[ConfusionMatrix, MetricReport]:
    try:
        preds = model.predict(test.X, hard_vote=hard_vote)
    except TypeError:
        preds = model.predict(test.X)
    cm = confusion_matrix(preds, test.y)
    return cm, compute_metrics(cm)


@dataclass(frozen=True)
class CVReport:
    classifier: str
    k: int
    seed: int
    folds: tuple[MetricReport, ...]
    mean: dict[str, float]
    std: dict[str, float]


def classifier_label(spec) -> str:
    if isinstance(spec, ForestParams):
        return "RandomForest"
    names = {
        "decision_tree": "DecisionTree",
        "gaussian_nb": "GaussianNB",
        "knn": "KNeighbors",
        "logistic_regression": "LogisticRegression",
    }
    return names[spec.name]


def _fit_spec(spec, train: Dataset, seed: int):
    if isinstance(spec, ForestParams):
        return fit_forest(train, replace(spec, seed=seed))
    if isinstance(spec, BaselineKind):
        return fit_baseline(spec, train, seed)
    raise TypeError(f"cannot fit a {type(spec).__name__}")


def cross_validate(classifier_spec, dataset: Dataset, k: int, seed: int) -> CVReport:
    """Stratified k-fold: fit on k-1 folds, score the held-out fold; fold
    metrics are the support-weighted variants."""
    reports = []
    for i, split in enumerate(stratified_kfold(dataset, k, seed)):
        model = _fit_spec(classifier_spec, split.train, derive_seed(seed, ROLE_CV_FOLD, i))
        _, report = evaluate(model, split.test)
        reports.append(report)
    series = {
        "accuracy": [r.accuracy for r in reports],
        "precision": [r.weighted.precision for r in reports],
        "recall": [r.weighted.recall for r in reports],
        "f1": [r.weighted.f1 for r in reports],
    }
    mean = {m: float(np.mean(v)) for m, v in series.items()}
    std = {m: float(np.std(v)) for m, v in series.items()}  # population sigma
    return CVReport(classifier_label(classifier_spec), k, seed, tuple(reports), mean, std)
