"""memshield: zero-shot obfuscated-malware detection from memory-forensics
features, with from-scratch random forests, exact Shapley explanations and
latency/size benchmarks."""

from .baselines import BaselineKind, fit_baseline, predict_baseline
from .bench import BenchConfig, LatencyReport, SizeReport, measure_latency, measure_size
from .catalog import MALMEM_CATALOG, SUBTYPE_COUNTS, SUBTYPE_NAMES, FeatureCatalog
from .dataset import (
    Dataset,
    Instance,
    LabelInfo,
    ScalerParams,
    fit_apply_minmax,
    load_dataset,
    parse_category,
    preprocess,
)
from .errors import MemshieldError
from .experiments import (
    BaselineTable,
    FeatureSweepResult,
    SubtypeModelResult,
    TransferReport,
    feature_count_sweep,
    run_stage1,
    run_subtype_experiment,
    run_transfer_suite,
    select_top_k,
)
from .explain import (
    Attribution,
    BackgroundSample,
    GlobalExplanation,
    beeswarm_data,
    draw_background,
    exact_shapley,
    force_plot_data,
    render_svg,
)
from .fixtures import FixtureSpec, make_fixture
from .forest import (
    DecisionTreeModel,
    ForestParams,
    ImportanceRanking,
    Prediction,
    RandomForestModel,
    fit_forest,
    fit_tree,
    gini_impurity,
    mdi_importance,
    predict,
)
from .metrics import (
    ConfusionMatrix,
    CVReport,
    MetricReport,
    compute_metrics,
    confusion_matrix,
    cross_validate,
)
from .serialize import deserialize, serialize
from .splits import Split, stratified_kfold, stratified_split, subtype_partition

__version__ = "0.1.0"

__all__ = [
    "Attribution",
    "BackgroundSample",
    "BaselineKind",
    "BaselineTable",
    "BenchConfig",
    "ConfusionMatrix",
    "CVReport",
    "Dataset",
    "DecisionTreeModel",
    "FeatureCatalog",
    "FeatureSweepResult",
    "FixtureSpec",
    "ForestParams",
    "GlobalExplanation",
    "ImportanceRanking",
    "Instance",
    "LabelInfo",
    "LatencyReport",
    "MALMEM_CATALOG",
    "MemshieldError",
    "MetricReport",
    "Prediction",
    "RandomForestModel",
    "ScalerParams",
    "SizeReport",
    "Split",
    "SubtypeModelResult",
    "SUBTYPE_COUNTS",
    "SUBTYPE_NAMES",
    "TransferReport",
    "beeswarm_data",
    "compute_metrics",
    "confusion_matrix",
    "cross_validate",
    "deserialize",
    "draw_background",
    "exact_shapley",
    "feature_count_sweep",
    "fit_apply_minmax",
    "fit_baseline",
    "fit_forest",
    "fit_tree",
    "force_plot_data",
    "gini_impurity",
    "load_dataset",
    "make_fixture",
    "mdi_importance",
    "measure_latency",
    "measure_size",
    "parse_category",
    "predict",
    "predict_baseline",
    "preprocess",
    "render_svg",
    "run_stage1",
    "run_subtype_experiment",
    "run_transfer_suite",
    "select_top_k",
    "serialize",
    "stratified_kfold",
    "stratified_split",
    "subtype_partition",
]
