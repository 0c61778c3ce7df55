"""Report artifact emission: versioned JSON, delimited CSV, and matplotlib
figures rendered to files. All writes are atomic (temp file + rename) and
artifacts embed the run configuration; nothing embeds a timestamp, so equal
runs produce byte-identical files."""

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import catalog as cat
from .bench import LatencyReport, SizeReport
from .dataset import Dataset
from .experiments import (
    BaselineTable,
    FeatureSweepResult,
    SubtypeModelResult,
    TransferReport,
)
from .explain import Attribution, GlobalExplanation
from .metrics import ConfusionMatrix, CVReport, MetricReport

SCHEMA_VERSION = 1

_TYPE_COLOR = {
    "TrojanHorse": "#d95f02",
    "Spyware": "#7570b3",
    "Ransomware": "#1b9e77",
}


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a CLI run; embedded in every artifact."""

    command: str
    data: str | None = None
    seed: int | None = None
    k_features: int | None = None
    background_size: int | None = None
    format: str = "both"
    n_trees: int | None = None
    hard_vote: bool = False
    count_check: bool = True
    subtype: str | None = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = asdict(self)
        extras = out.pop("extras")
        out.update(extras)
        return out


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, payload: dict, config: RunConfig) -> None:
    body = {"schema_version": SCHEMA_VERSION, "run_config": config.as_dict()}
    body.update(payload)
    atomic_write_text(path, json.dumps(body, indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def save_figure(fig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    fig.savefig(tmp, format="png", dpi=120, bbox_inches="tight")
    plt.close(fig)
    os.replace(tmp, path)


# -- dict conversions ----------------------------------------------------------


def metric_report_dict(report: MetricReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "per_class": {
            name: asdict(m) for name, m in report.per_class.items()
        },
        "weighted": {
            "precision": report.weighted.precision,
            "recall": report.weighted.recall,
            "f1": report.weighted.f1,
        },
    }


def confusion_dict(cm: ConfusionMatrix) -> dict:
    return {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn}


def latency_dict(report: LatencyReport) -> dict:
    return asdict(report)


def size_dict(report: SizeReport) -> dict:
    return asdict(report)


def cv_report_dict(report: CVReport) -> dict:
    return {
        "classifier": report.classifier,
        "k": report.k,
        "seed": report.seed,
        "folds": [metric_report_dict(r) for r in report.folds],
        "mean": report.mean,
        "std": report.std,
    }


def subtype_result_dict(result: SubtypeModelResult, include_latency: bool = True) -> dict:
    out = {
        "subtype": result.subtype,
        "malware_type": cat.TYPE_OF_SUBTYPE.get(result.subtype),
        "selected_features": [
            {"rank": i + 1, "feature": name, "score": score}
            for i, (name, score) in enumerate(result.selected_features.entries)
        ],
        "metrics": metric_report_dict(result.metrics),
        "confusion": confusion_dict(result.confusion),
        "model_size_bytes": result.model_size_bytes,
        "train_size": result.train_size,
        "test_size": result.test_size,
        "breakdown": {
            "recall_unseen_subtypes": result.recall_unseen_subtypes,
            "recall_held_in_subtype": result.recall_held_in_subtype,
            "benign_specificity": result.benign_specificity,
        },
        "seed": result.seed,
    }
    # wall-clock measurements are the one non-reproducible quantity; the
    # transfer suite routes them to a separate timings artifact instead
    if include_latency:
        out["latency"] = latency_dict(result.latency)
    return out


def transfer_report_dict(report: TransferReport) -> dict:
    union = sorted({n for r in report.results for n in r.selected_features.names})
    return {
        "k": report.k,
        "seed": report.seed,
        "ranking": [
            {"subtype": s, "accuracy": a, "rank": r} for s, a, r in report.ranking
        ],
        "results": [subtype_result_dict(r, include_latency=False) for r in report.results],
        "feature_frequencies": [
            {"feature": name, "counts_per_rank": list(counts)}
            for name, counts in report.feature_frequencies
        ],
        "selected_feature_union": union,
    }


def transfer_timings_dict(report: TransferReport) -> dict:
    return {
        "latency_by_subtype": {
            r.subtype: latency_dict(r.latency) for r in report.results
        }
    }


def attribution_dict(attr: Attribution) -> dict:
    return {
        "base_value": attr.base_value,
        "prediction": attr.prediction,
        "instance_ref": attr.instance_ref,
        "contributions": [
            {"feature": n, "phi": float(p), "value": float(v)}
            for n, p, v in zip(attr.feature_names, attr.phi, attr.feature_values)
        ],
    }


# -- csv writers ---------------------------------------------------------------


def write_baseline_table_csv(path, table: BaselineTable) -> None:
    rows = [
        (
            name,
            f"{r.accuracy:.6f}",
            f"{r.weighted.precision:.6f}",
            f"{r.weighted.recall:.6f}",
            f"{r.weighted.f1:.6f}",
            f"{r.precision:.6f}",
            f"{r.recall:.6f}",
            f"{r.f1:.6f}",
        )
        for name, r in table.entries
    ]
    write_csv(
        path,
        (
            "classifier",
            "accuracy",
            "precision_weighted",
            "recall_weighted",
            "f1_weighted",
            "precision_malware",
            "recall_malware",
            "f1_malware",
        ),
        rows,
    )


def write_cv_csv(path, report: CVReport) -> None:
    rows = [
        (
            str(i + 1),
            f"{r.accuracy:.6f}",
            f"{r.weighted.precision:.6f}",
            f"{r.weighted.recall:.6f}",
            f"{r.weighted.f1:.6f}",
        )
        for i, r in enumerate(report.folds)
    ]
    for label, stats in (("mean", report.mean), ("std", report.std)):
        rows.append(
            (
                label,
                f"{stats['accuracy']:.6f}",
                f"{stats['precision']:.6f}",
                f"{stats['recall']:.6f}",
                f"{stats['f1']:.6f}",
            )
        )
    write_csv(path, ("fold", "accuracy", "precision", "recall", "f1"), rows)


def write_transfer_csv(path, report: TransferReport) -> None:
    rank_of = {s: r for s, _, r in report.ranking}
    rows = []
    for res in report.results:
        rows.append(
            (
                res.subtype,
                cat.TYPE_OF_SUBTYPE.get(res.subtype, ""),
                str(rank_of[res.subtype]),
                f"{res.metrics.accuracy:.6f}",
                f"{res.metrics.precision:.6f}",
                f"{res.metrics.recall:.6f}",
                f"{res.metrics.weighted.f1:.6f}",
                str(res.model_size_bytes),
                ";".join(res.selected_features.names),
            )
        )
    write_csv(
        path,
        (
            "subtype",
            "malware_type",
            "rank",
            "accuracy",
            "precision",
            "recall",
            "f1_weighted",
            "model_size_bytes",
            "top_features",
        ),
        rows,
    )


def write_frequency_csv(path, report: TransferReport) -> None:
    header = ["feature"] + [f"rank{r + 1}" for r in range(report.k)]
    rows = [
        (name, *[str(c) for c in counts]) for name, counts in report.feature_frequencies
    ]
    write_csv(path, header, rows)


def write_sweep_csv(path, sweep: FeatureSweepResult) -> None:
    write_csv(
        path,
        ("k", "accuracy"),
        [(str(k), f"{acc:.6f}") for k, acc in sweep.entries],
    )


def write_counts_csv(path, dataset: Dataset) -> None:
    counts = dataset.subtype_counts()
    n_benign, n_malware = dataset.class_counts()
    rows = []
    for name in counts:
        expected = cat.SUBTYPE_COUNTS.get(name)
        rows.append(
            (
                cat.TYPE_OF_SUBTYPE.get(name, ""),
                name,
                str(counts[name]),
                "" if expected is None else str(expected),
                str(counts[name] == expected),
            )
        )
    rows.append(("", "benign", str(n_benign), str(cat.BENIGN_COUNT), str(n_benign == cat.BENIGN_COUNT)))
    rows.append(("", "malware-total", str(n_malware), str(cat.MALWARE_COUNT), str(n_malware == cat.MALWARE_COUNT)))
    write_csv(path, ("malware_type", "subtype", "count", "expected", "matches"), rows)


def write_shap_csv(path, explanation) -> None:
    """Point-level export with the beeswarm color channel."""
    rows = []
    if isinstance(explanation, GlobalExplanation):
        for i, attr in enumerate(explanation.attributions):
            for j, name in enumerate(explanation.feature_names):
                rows.append(
                    (
                        str(attr.instance_ref),
                        name,
                        f"{attr.phi[j]:.10g}",
                        f"{explanation.normalized_values[i, j]:.6f}",
                        f"{attr.prediction:.10g}",
                        f"{attr.base_value:.10g}",
                    )
                )
    else:
        attr = explanation
        for j, name in enumerate(attr.feature_names):
            rows.append(
                (
                    str(attr.instance_ref),
                    name,
                    f"{attr.phi[j]:.10g}",
                    "",
                    f"{attr.prediction:.10g}",
                    f"{attr.base_value:.10g}",
                )
            )
    write_csv(
        path,
        ("instance_id", "feature", "phi", "feature_value_normalized", "prediction", "base_value"),
        rows,
    )


# -- figures -------------------------------------------------------------------


def figure_stage1_accuracies(table: BaselineTable, path) -> None:
    names = [n for n, _ in table.entries]
    accs = [r.accuracy for _, r in table.entries]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(names, accs, color="#4477aa")
    ax.set_ylim(min(0.9, min(accs) - 0.02), 1.001)
    ax.set_ylabel("accuracy")
    ax.set_title("Stage 1: binary classification on the held-out split")
    ax.tick_params(axis="x", rotation=20)
    for i, acc in enumerate(accs):
        ax.text(i, acc, f"{acc:.4f}", ha="center", va="bottom", fontsize=8)
    save_figure(fig, path)


def figure_transfer_accuracies(report: TransferReport, path) -> None:
    results = sorted(
        report.results, key=lambda r: cat.subtype_order_key(r.subtype)
    )
    names = [r.subtype for r in results]
    accs = [r.metrics.accuracy for r in results]
    colors = [
        _TYPE_COLOR.get(cat.TYPE_OF_SUBTYPE.get(r.subtype, ""), "#888888") for r in results
    ]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.bar(names, accs, color=colors)
    ax.set_ylim(min(0.9, min(accs) - 0.02), 1.001)
    ax.axhline(0.99, color="#444", linestyle="--", linewidth=0.8)
    ax.set_ylabel("transfer accuracy")
    ax.set_title("Per-subtype models evaluated on all unseen subtypes")
    ax.tick_params(axis="x", rotation=60)
    handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in _TYPE_COLOR.values()]
    ax.legend(handles, list(_TYPE_COLOR.keys()), fontsize=8)
    save_figure(fig, path)


def figure_sweep(sweep: FeatureSweepResult, path) -> None:
    ks = [k for k, _ in sweep.entries]
    accs = [a for _, a in sweep.entries]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(ks, accs, marker="o", color="#4477aa")
    ax.set_xlabel("number of selected features")
    ax.set_ylabel("accuracy")
    ax.set_title(f"Accuracy vs feature count ({sweep.subtype} model)")
    ax.grid(alpha=0.3)
    save_figure(fig, path)


def figure_confusion(cm: ConfusionMatrix, path, title: str = "Confusion matrix") -> None:
    grid = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]], dtype=float)
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    ax.imshow(grid, cmap="Blues")
    for (i, j), value in np.ndenumerate(grid):
        ax.text(j, i, f"{int(value)}", ha="center", va="center",
                color="black" if value < grid.max() * 0.6 else "white")
    ax.set_xticks([0, 1], ["benign", "malware"])
    ax.set_yticks([0, 1], ["benign", "malware"])
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(title)
    save_figure(fig, path)
