"""Experiment orchestration: the stage-1 baseline table, the per-subtype
transfer suite with top-k feature selection, and the feature-count sweep."""

from dataclasses import dataclass, field

import numpy as np

from . import catalog as cat
from .baselines import BaselineKind, fit_baseline
from .bench import BenchConfig, LatencyReport, measure_latency, measure_size
from .dataset import Dataset
from .forest import ForestParams, ImportanceRanking, fit_forest, mdi_importance
from .metrics import ConfusionMatrix, MetricReport, evaluate
from .seeding import (
    ROLE_BASELINE,
    ROLE_FINAL_FIT,
    ROLE_PARTITION,
    ROLE_SELECTION,
    ROLE_SPLIT,
    derive_seed,
)
from .splits import Split, stratified_split, subtype_partition

DEFAULT_TOP_K = 5

# stage-1 lineup in canonical (tie-break) order; the forest comes first so
# it wins exact F1 ties
STAGE1_CLASSIFIERS = (
    "RandomForest",
    "DecisionTree",
    "LogisticRegression",
    "GaussianNB",
    "KNeighbors",
)

_BASELINE_KINDS = {
    "DecisionTree": BaselineKind.decision_tree,
    "LogisticRegression": BaselineKind.logistic_regression,
    "GaussianNB": BaselineKind.gaussian_nb,
    "KNeighbors": BaselineKind.knn,
}


@dataclass(frozen=True)
class BaselineTable:
    """Stage-1 comparison: every classifier fitted and scored on one split."""

    entries: tuple[tuple[str, MetricReport], ...]  # sorted by weighted F1
    winner: str
    train_size: int
    test_size: int
    seed: int

    def report(self, name: str) -> MetricReport:
        for n, r in self.entries:
            if n == name:
                return r
        raise KeyError(name)


def run_stage1(
    dataset: Dataset,
    seed: int,
    n_trees: int = 100,
    classifiers: tuple[str, ...] = STAGE1_CLASSIFIERS,
    hard_vote: bool = False,
) -> BaselineTable:
    """80/20 stratified split, fit each classifier on train, score on test,
    rank by weighted F1 (descending, stable under the canonical order)."""
    split = stratified_split(dataset, 0.2, derive_seed(seed, ROLE_SPLIT))
    rows = []
    for name in STAGE1_CLASSIFIERS:
        if name not in classifiers:
            continue
        model_seed = derive_seed(seed, ROLE_BASELINE, STAGE1_CLASSIFIERS.index(name))
        if name == "RandomForest":
            model = fit_forest(split.train, ForestParams(n_trees=n_trees, seed=model_seed))
            _, report = evaluate(model, split.test, hard_vote=hard_vote)
        else:
            model = fit_baseline(_BASELINE_KINDS[name](), split.train, model_seed)
            _, report = evaluate(model, split.test)
        rows.append((name, report))
    rows.sort(key=lambda item: -item[1].weighted.f1)  # stable: canonical order breaks ties
    return BaselineTable(tuple(rows), rows[0][0], len(split.train), len(split.test), seed)


def select_top_k(train: Dataset, k: int, seed: int, n_trees: int = 100) -> ImportanceRanking:
    """Fit a default full-feature forest and keep its k highest-MDI features."""
    if k > train.n_features:
        raise ValueError(f"cannot select top {k} of {train.n_features} features")
    forest = fit_forest(train, ForestParams(n_trees=n_trees, seed=seed))
    return mdi_importance(forest).truncate(k)


@dataclass
class SubtypeModelResult:
    """One transfer experiment: train on a single subtype (plus balanced
    benign sample), evaluate on everything else."""

    subtype: str
    selected_features: ImportanceRanking
    metrics: MetricReport
    confusion: ConfusionMatrix
    model_size_bytes: int
    latency: LatencyReport
    seed: int
    train_size: int
    test_size: int
    # aggregate metrics cover the whole transfer test set; these split out
    # the unseen-subtype / held-in / benign components for the record
    recall_unseen_subtypes: float
    recall_held_in_subtype: float
    benign_specificity: float
    model: object = field(repr=False, default=None)
    split: Split = field(repr=False, default=None)

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy


def _subtype_stream(subtype: str) -> int:
    idx, _ = cat.subtype_order_key(subtype)
    if idx >= len(cat.SUBTYPE_NAMES):
        idx = len(cat.SUBTYPE_NAMES) + sum(ord(c) for c in subtype) % 1009
    return idx


def run_subtype_experiment(
    dataset: Dataset,
    subtype: str,
    k: int = DEFAULT_TOP_K,
    seed: int = 0,
    n_trees: int = 100,
    train_fraction: float = 0.8,
    latency_reps: int = 10_000,
    hard_vote: bool = False,
) -> SubtypeModelResult:
    stream = _subtype_stream(subtype)
    split = subtype_partition(
        dataset, subtype, train_fraction, derive_seed(seed, ROLE_PARTITION, stream)
    )
    ranking = select_top_k(split.train, k, derive_seed(seed, ROLE_SELECTION, stream), n_trees)
    train = split.train.project(ranking.names)
    test = split.test.project(ranking.names)
    model = fit_forest(
        train, ForestParams(n_trees=n_trees, seed=derive_seed(seed, ROLE_FINAL_FIT, stream))
    )
    cm, metrics = evaluate(model, test, hard_vote=hard_vote)

    preds = model.predict(test.X, hard_vote=hard_vote)
    malware = test.y == cat.MALWARE_LABEL
    held_in = malware & (test.subtypes == subtype)
    unseen = malware & ~held_in
    benign = ~malware
    recall_unseen = float((preds[unseen] == 1).mean()) if unseen.any() else float("nan")
    recall_held_in = float((preds[held_in] == 1).mean()) if held_in.any() else float("nan")
    specificity = float((preds[benign] == 0).mean()) if benign.any() else float("nan")

    size = measure_size(model)
    bench_rows = test.X[: min(len(test), 4096)]
    latency = measure_latency(
        model, bench_rows, BenchConfig(warmup=min(1_000, latency_reps), reps=latency_reps)
    )
    return SubtypeModelResult(
        subtype=subtype,
        selected_features=ranking,
        metrics=metrics,
        confusion=cm,
        model_size_bytes=size.serialized_bytes,
        latency=latency,
        seed=seed,
        train_size=len(train),
        test_size=len(test),
        recall_unseen_subtypes=recall_unseen,
        recall_held_in_subtype=recall_held_in,
        benign_specificity=specificity,
        model=model,
        split=split,
    )


@dataclass(frozen=True)
class TransferReport:
    """The full per-subtype suite, its accuracy ranking, and how often each
    feature was selected at each importance rank."""

    results: tuple[SubtypeModelResult, ...]  # canonical subtype order
    ranking: tuple[tuple[str, float, int], ...]  # (subtype, accuracy, rank) best first
    feature_frequencies: tuple[tuple[str, tuple[int, ...]], ...]  # feature -> count per rank
    k: int
    seed: int

    def result(self, subtype: str) -> SubtypeModelResult:
        for r in self.results:
            if r.subtype == subtype:
                return r
        raise KeyError(subtype)

    @property
    def best_subtype(self) -> str:
        return self.ranking[0][0]


def _frequency_table(results, k: int):
    counts: dict[str, list[int]] = {}
    for res in results:
        for rank, name in enumerate(res.selected_features.names):
            counts.setdefault(name, [0] * k)[rank] += 1
    ordered = sorted(counts.items(), key=lambda kv: (*(-c for c in kv[1]), kv[0]))
    return tuple((name, tuple(c)) for name, c in ordered)


def run_transfer_suite(
    dataset: Dataset,
    seed: int,
    k: int = DEFAULT_TOP_K,
    n_trees: int = 100,
    subtypes: tuple[str, ...] | None = None,
    latency_reps: int = 10_000,
    hard_vote: bool = False,
) -> TransferReport:
    """One transfer experiment per subtype; experiments own derived seeds, so
    any execution order (or a filtered rerun) reproduces identical models."""
    names = subtypes if subtypes is not None else dataset.present_subtypes()
    names = tuple(sorted(names, key=cat.subtype_order_key))
    results = tuple(
        run_subtype_experiment(
            dataset, name, k=k, seed=seed, n_trees=n_trees,
            latency_reps=latency_reps, hard_vote=hard_vote,
        )
        for name in names
    )
    order = sorted(
        results, key=lambda r: (-r.metrics.accuracy, cat.subtype_order_key(r.subtype))
    )
    ranking = tuple(
        (r.subtype, r.metrics.accuracy, rank + 1) for rank, r in enumerate(order)
    )
    return TransferReport(results, ranking, _frequency_table(results, k), k, seed)


@dataclass(frozen=True)
class FeatureSweepResult:
    subtype: str
    entries: tuple[tuple[int, float], ...]  # (k, accuracy), k strictly increasing
    seed: int

    def accuracy_at(self, k: int) -> float:
        for kk, acc in self.entries:
            if kk == k:
                return acc
        raise KeyError(k)


def feature_count_sweep(
    dataset: Dataset,
    subtype: str,
    k_list,
    seed: int,
    n_trees: int = 100,
    latency_reps: int = 1_000,
) -> FeatureSweepResult:
    """Accuracy of the subtype model as a function of the selected feature
    count; the partition and selection forest are seed-identical across k."""
    ks = [int(k) for k in k_list]
    if ks != sorted(set(ks)):
        raise ValueError("k_list must be strictly increasing")
    if not ks:
        raise ValueError("k_list must be non-empty")
    entries = []
    for k in ks:
        res = run_subtype_experiment(
            dataset, subtype, k=k, seed=seed, n_trees=n_trees, latency_reps=latency_reps
        )
        entries.append((k, res.metrics.accuracy))
    return FeatureSweepResult(subtype, tuple(entries), seed)
