"""Command-line pipeline driver.

Every training command requires an explicit --seed and is fully
deterministic under it; artifacts land in per-command directories under
--out and embed the run configuration. Exit codes: 0 success, 1 validation
or data failure, 2 usage error.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog as cat
from .baselines import BaselineKind
from .bench import BenchConfig, measure_latency, measure_size
from .dataset import Dataset, load_dataset, preprocess
from .errors import MemshieldError, UnknownSubtypeError
from .experiments import (
    feature_count_sweep,
    run_stage1,
    run_subtype_experiment,
    run_transfer_suite,
)
from .explain import beeswarm_data, draw_background, exact_shapley, render_svg
from .fixtures import FixtureSpec, make_fixture, malmem_profile_spec
from .forest import ForestParams
from .metrics import cross_validate, evaluate
from .reports import (
    RunConfig,
    atomic_write_bytes,
    atomic_write_text,
    attribution_dict,
    confusion_dict,
    cv_report_dict,
    figure_confusion,
    figure_stage1_accuracies,
    figure_sweep,
    figure_transfer_accuracies,
    latency_dict,
    metric_report_dict,
    size_dict,
    subtype_result_dict,
    transfer_report_dict,
    transfer_timings_dict,
    write_baseline_table_csv,
    write_counts_csv,
    write_csv,
    write_cv_csv,
    write_frequency_csv,
    write_json,
    write_shap_csv,
    write_sweep_csv,
    write_transfer_csv,
)
from .seeding import ROLE_SAMPLE, rng_for
from .serialize import deserialize, serialize

DATA_ENV_VAR = "MEMSHIELD_DATA"


def _add_common(parser, *, seed_required: bool, needs_out: bool = True):
    parser.add_argument(
        "--data",
        default=os.environ.get(DATA_ENV_VAR),
        help=f"input CSV path (default: ${DATA_ENV_VAR})",
    )
    parser.add_argument("--no-count-check", action="store_true",
                        help="skip the published-count validation (partial files)")
    if seed_required:
        parser.add_argument("--seed", type=int, required=True,
                            help="master seed; all randomness derives from it")
    if needs_out:
        parser.add_argument("--out", required=True, help="output directory")
        parser.add_argument("--format", choices=("json", "csv", "both"), default="both",
                            help="report formats to emit (figures always)")


def _add_training(parser):
    parser.add_argument("--trees", type=int, default=100, help="forest size")
    parser.add_argument("--hard-vote", action="store_true",
                        help="aggregate forests by majority label instead of mean probability")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memshield",
        description="Zero-shot obfuscated-malware detection pipeline over "
                    "memory-forensics feature vectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="ingest a CSV and check the published counts")
    _add_common(p, seed_required=False, needs_out=False)
    p.add_argument("--out", help="optional output directory for the count table")
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stage1", help="train/evaluate the baseline classifier table")
    _add_common(p, seed_required=True)
    _add_training(p)
    p.add_argument("--cv", type=int, default=0, metavar="K",
                   help="also run stratified K-fold cross-validation of the forest")
    p.set_defaults(func=cmd_stage1)

    p = sub.add_parser("subtype", help="train one subtype-transfer model")
    _add_common(p, seed_required=True)
    _add_training(p)
    p.add_argument("--name", required=True, help="malware subtype to train on")
    p.add_argument("--k-features", type=int, default=5)
    p.add_argument("--latency-reps", type=int, default=10_000)
    p.set_defaults(func=cmd_subtype)

    p = sub.add_parser("transfer", help="run the full per-subtype transfer suite")
    _add_common(p, seed_required=True)
    _add_training(p)
    p.add_argument("--k-features", type=int, default=5)
    p.add_argument("--only", action="append", metavar="SUBTYPE",
                   help="restrict the suite to the named subtype(s); repeatable")
    p.add_argument("--latency-reps", type=int, default=10_000)
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("sweep", help="accuracy vs number of selected features")
    _add_common(p, seed_required=True)
    _add_training(p)
    p.add_argument("--name", required=True, help="malware subtype to train on")
    p.add_argument("--k-list", default="1,2,3,4,5,10,20,52",
                   help="comma-separated feature counts, strictly increasing")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("explain", help="Shapley attributions for a saved model")
    _add_common(p, seed_required=True)
    p.add_argument("--model", required=True, help="serialized model path")
    p.add_argument("--background-data", help="CSV for the background sample "
                                             "(default: --data)")
    p.add_argument("--background-size", type=int, default=100)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--instance", type=int, help="explain this row (force plot)")
    group.add_argument("--sample", type=int, help="explain a random sample (beeswarm)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("bench", help="latency and size of a saved model")
    _add_common(p, seed_required=False)
    p.add_argument("--model", required=True, help="serialized model path")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--warmup", type=int, default=1_000)
    p.add_argument("--batch-size", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fixture", help="emit a synthetic CSV in the ingestion schema")
    p.add_argument("--out-file", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--profile", choices=("basic", "malmem"), default="basic")
    p.add_argument("--benign", type=int, default=1000)
    p.add_argument("--per-subtype", type=int, default=200)
    p.add_argument("--subtypes", type=int, default=15)
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--informative", type=int, default=10)
    p.add_argument("--scale", type=float, default=1.0,
                   help="malmem profile: scale the published counts")
    p.set_defaults(func=cmd_fixture)
    return parser


def _load(args, need_full_check: bool = True) -> Dataset:
    if not args.data:
        raise UsageError(f"--data is required (or set {DATA_ENV_VAR})")
    check = need_full_check and not args.no_count_check
    return load_dataset(args.data, count_check=check)


class UsageError(MemshieldError):
    pass


def _formats(args) -> set[str]:
    fmt = getattr(args, "format", "both")
    return {"json", "csv"} if fmt == "both" else {fmt}


def _config(args, command: str, **extras) -> RunConfig:
    return RunConfig(
        command=command,
        data=args.data,
        seed=getattr(args, "seed", None),
        k_features=getattr(args, "k_features", None),
        background_size=getattr(args, "background_size", None),
        format=getattr(args, "format", "both"),
        n_trees=getattr(args, "trees", None),
        hard_vote=getattr(args, "hard_vote", False),
        count_check=not getattr(args, "no_count_check", False),
        subtype=getattr(args, "name", None),
        extras=extras,
    )


def _print_counts(dataset: Dataset) -> None:
    n_benign, n_malware = dataset.class_counts()
    print(f"{'type':<12} {'subtype':<15} {'count':>7} {'expected':>9}")
    for name, count in dataset.subtype_counts().items():
        expected = cat.SUBTYPE_COUNTS.get(name, "-")
        print(f"{cat.TYPE_OF_SUBTYPE.get(name, '?'):<12} {name:<15} {count:>7} {expected!s:>9}")
    print(f"{'':<12} {'benign':<15} {n_benign:>7} {cat.BENIGN_COUNT:>9}")
    print(f"{'':<12} {'malware total':<15} {n_malware:>7} {cat.MALWARE_COUNT:>9}")


def cmd_validate(args) -> int:
    dataset = _load(args)
    _print_counts(dataset)
    matches = (
        dataset.class_counts() == (cat.BENIGN_COUNT, cat.MALWARE_COUNT)
        and dataset.subtype_counts() == cat.SUBTYPE_COUNTS
    )
    print(f"count check: {'ok' if matches else 'MISMATCH (allowed by --no-count-check)'}")
    if args.out:
        out = Path(args.out) / "validate"
        config = _config(args, "validate")
        formats = _formats(args)
        if "json" in formats:
            write_json(out / "counts.json", {
                "class_counts": {"benign": dataset.class_counts()[0],
                                 "malware": dataset.class_counts()[1]},
                "subtype_counts": dataset.subtype_counts(),
                "expected_subtype_counts": dict(cat.SUBTYPE_COUNTS),
                "matches_published_distribution": matches,
            }, config)
        if "csv" in formats:
            write_counts_csv(out / "counts.csv", dataset)
    return 0


def cmd_stage1(args) -> int:
    dataset = preprocess(_load(args))
    table = run_stage1(dataset, args.seed, n_trees=args.trees, hard_vote=args.hard_vote)
    out = Path(args.out) / "stage1"
    config = _config(args, "stage1", cv=args.cv)
    formats = _formats(args)
    if "json" in formats:
        write_json(out / "baseline_table.json", {
            "train_size": table.train_size,
            "test_size": table.test_size,
            "winner": table.winner,
            "classifiers": [
                {"name": name, **metric_report_dict(report)}
                for name, report in table.entries
            ],
        }, config)
    if "csv" in formats:
        write_baseline_table_csv(out / "baseline_table.csv", table)
    figure_stage1_accuracies(table, out / "accuracies.png")
    for name, report in table.entries:
        print(f"{name:<20} accuracy={report.accuracy:.4f} f1w={report.weighted.f1:.4f}")
    print(f"winner by F1: {table.winner}")

    if args.cv:
        cv = cross_validate(ForestParams(n_trees=args.trees), dataset, args.cv, args.seed)
        if "json" in formats:
            write_json(out / "cv_random_forest.json", cv_report_dict(cv), config)
        if "csv" in formats:
            write_cv_csv(out / "cv_random_forest.csv", cv)
        print(f"{args.cv}-fold CV: mean f1={cv.mean['f1']:.6f} sigma={cv.std['f1']:.6f}")
    return 0


def _check_subtype(dataset: Dataset, name: str) -> None:
    if name not in dataset.present_subtypes():
        raise UnknownSubtypeError(name, dataset.present_subtypes())


def cmd_subtype(args) -> int:
    raw = _load(args)
    dataset = preprocess(raw)
    _check_subtype(dataset, args.name)
    result = run_subtype_experiment(
        dataset, args.name, k=args.k_features, seed=args.seed, n_trees=args.trees,
        latency_reps=args.latency_reps, hard_vote=args.hard_vote,
    )
    out = Path(args.out) / "subtype" / args.name
    config = _config(args, "subtype")
    formats = _formats(args)
    if "json" in formats:
        write_json(out / "result.json", subtype_result_dict(result), config)
    if "csv" in formats:
        write_csv(out / "top_features.csv", ("rank", "feature", "score"),
                  [(str(i + 1), n, f"{s:.8f}")
                   for i, (n, s) in enumerate(result.selected_features.entries)])
    atomic_write_bytes(out / "model.bin", serialize(result.model))
    raw.select_by_source_rows(result.split.train.source_rows).write_csv(out / "train.csv")
    figure_confusion(result.confusion, out / "confusion.png",
                     title=f"{args.name} transfer model")
    m = result.metrics
    print(f"{args.name}: accuracy={m.accuracy:.4f} precision={m.precision:.4f} "
          f"recall={m.recall:.4f} f1={m.f1:.4f}")
    print(f"selected: {', '.join(result.selected_features.names)}")
    print(f"model: {result.model_size_bytes} bytes; "
          f"latency mean {result.latency.mean_us:.2f} us/instance")
    return 0


def cmd_transfer(args) -> int:
    dataset = preprocess(_load(args))
    subtypes = None
    if args.only:
        for name in args.only:
            _check_subtype(dataset, name)
        subtypes = tuple(args.only)
    report = run_transfer_suite(
        dataset, args.seed, k=args.k_features, n_trees=args.trees,
        subtypes=subtypes, latency_reps=args.latency_reps, hard_vote=args.hard_vote,
    )
    out = Path(args.out) / "transfer"
    config = _config(args, "transfer", only=args.only)
    formats = _formats(args)
    if "json" in formats:
        write_json(out / "transfer_report.json", transfer_report_dict(report), config)
        write_json(out / "timings.json", transfer_timings_dict(report), config)
        for res in report.results:
            write_json(out / "subtypes" / f"{res.subtype}.json",
                       subtype_result_dict(res, include_latency=False), config)
    if "csv" in formats:
        write_transfer_csv(out / "table_accuracy.csv", report)
        write_frequency_csv(out / "feature_frequencies.csv", report)
    for res in report.results:
        atomic_write_bytes(out / "models" / f"{res.subtype}.bin", serialize(res.model))
    figure_transfer_accuracies(report, out / "accuracies.png")
    for subtype, accuracy, rank in report.ranking:
        print(f"#{rank:<3} {subtype:<15} accuracy={accuracy:.4f}")
    return 0


def cmd_sweep(args) -> int:
    dataset = preprocess(_load(args))
    _check_subtype(dataset, args.name)
    try:
        k_list = [int(tok) for tok in args.k_list.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"--k-list must be comma-separated integers, got {args.k_list!r}")
    k_list = [k for k in k_list if k <= dataset.n_features]
    sweep = feature_count_sweep(dataset, args.name, k_list, args.seed, n_trees=args.trees)
    out = Path(args.out) / "sweep"
    config = _config(args, "sweep", k_list=k_list)
    formats = _formats(args)
    if "json" in formats:
        write_json(out / f"{args.name}_sweep.json", {
            "subtype": sweep.subtype,
            "entries": [{"k": k, "accuracy": acc} for k, acc in sweep.entries],
        }, config)
    if "csv" in formats:
        write_sweep_csv(out / f"{args.name}_sweep.csv", sweep)
    figure_sweep(sweep, out / f"{args.name}_sweep.png")
    for k, acc in sweep.entries:
        print(f"k={k:<3} accuracy={acc:.4f}")
    return 0


def _load_for_model(args, model) -> Dataset:
    dataset = preprocess(_load(args, need_full_check=True))
    missing = [n for n in model.feature_names if n not in dataset.feature_names]
    if missing:
        raise UsageError(
            f"data lacks the model's features: {', '.join(missing)}"
        )
    return dataset.project(model.feature_names)


def cmd_explain(args) -> int:
    with open(args.model, "rb") as fh:
        model = deserialize(fh.read())
    data = _load_for_model(args, model)
    if args.background_data:
        bg_args = argparse.Namespace(
            data=args.background_data, no_count_check=True
        )
        bg_source = _load_for_model(bg_args, model)
    else:
        bg_source = data
    background = draw_background(bg_source, args.background_size, args.seed)
    out = Path(args.out) / "explain"
    config = _config(args, "explain", model=args.model,
                     background_data=args.background_data,
                     instance=args.instance, sample=args.sample)
    formats = _formats(args)
    if args.instance is not None:
        if not 0 <= args.instance < len(data):
            raise UsageError(f"--instance {args.instance} out of range (0..{len(data) - 1})")
        attr = exact_shapley(model, data.X[args.instance], background,
                             int(data.source_rows[args.instance]))
        if "json" in formats:
            write_json(out / "attribution.json", attribution_dict(attr), config)
        if "csv" in formats:
            write_shap_csv(out / "shap_values.csv", attr)
        out.mkdir(parents=True, exist_ok=True)
        render_svg(attr, "force", out / "force.svg")
        print(f"instance {args.instance}: prediction={attr.prediction:.4f} "
              f"base={attr.base_value:.4f}")
        for name, phi in sorted(zip(attr.feature_names, attr.phi), key=lambda t: -abs(t[1])):
            print(f"  {name:<40} phi={phi:+.5f}")
    else:
        if args.sample < 1:
            raise UsageError("--sample must be >= 1")
        rng = rng_for(args.seed, ROLE_SAMPLE)
        take = min(args.sample, len(data))
        rows = np.sort(rng.choice(len(data), size=take, replace=False))
        explanation = beeswarm_data(model, data.select(rows), background)
        if "json" in formats:
            write_json(out / "beeswarm.json", {
                "feature_order": [explanation.feature_names[i]
                                  for i in explanation.feature_order],
                "mean_abs_phi": {
                    explanation.feature_names[i]: float(explanation.mean_abs_phi[i])
                    for i in explanation.feature_order
                },
                "attributions": [attribution_dict(a) for a in explanation.attributions],
            }, config)
        if "csv" in formats:
            write_shap_csv(out / "shap_values.csv", explanation)
        out.mkdir(parents=True, exist_ok=True)
        render_svg(explanation, "beeswarm", out / "beeswarm.svg")
        print(f"explained {take} instances; features by mean |phi|:")
        for i in explanation.feature_order:
            print(f"  {explanation.feature_names[i]:<40} {explanation.mean_abs_phi[i]:.5f}")
    return 0


def cmd_bench(args) -> int:
    with open(args.model, "rb") as fh:
        model = deserialize(fh.read())
    data = _load_for_model(args, model)
    config_b = BenchConfig(warmup=args.warmup, reps=args.reps, batch_size=args.batch_size)
    latency = measure_latency(model, data.X, config_b)
    size = measure_size(model)
    accuracy = None
    try:
        _, report = evaluate(model, data)
        accuracy = report.accuracy
    except Exception:
        pass
    out = Path(args.out) / "bench"
    config = _config(args, "bench", model=args.model, reps=args.reps)
    formats = _formats(args)
    if "json" in formats:
        write_json(out / "bench.json", {
            "latency": latency_dict(latency),
            "size": size_dict(size),
            "accuracy": accuracy,
        }, config)
    if "csv" in formats:
        write_csv(out / "bench.csv",
                  ("classifier", "n_features", "accuracy", "mean_latency_us",
                   "median_latency_us", "p99_latency_us", "model_size_bytes"),
                  [(type(model).__name__, str(len(model.feature_names)),
                    "" if accuracy is None else f"{accuracy:.6f}",
                    f"{latency.mean_us:.3f}", f"{latency.median_us:.3f}",
                    f"{latency.p99_us:.3f}", str(size.serialized_bytes))])
    acc_text = "n/a" if accuracy is None else f"{accuracy:.4f}"
    print(f"{type(model).__name__}  features={len(model.feature_names)}  "
          f"accuracy={acc_text}  speed={latency.mean_us:.2f} us/instance  "
          f"size={size.serialized_bytes / 1024:.2f} KB")
    return 0


def cmd_fixture(args) -> int:
    if args.profile == "malmem":
        spec = malmem_profile_spec(separation=args.separation,
                                   n_informative=args.informative, scale=args.scale)
    else:
        counts = {name: args.per_subtype for name in cat.SUBTYPE_NAMES[: args.subtypes]}
        spec = FixtureSpec(
            n_benign=args.benign,
            n_per_subtype=counts,
            n_features=55,
            separation=args.separation,
            n_informative=args.informative,
            catalog=cat.MALMEM_CATALOG,
        )
    dataset = make_fixture(spec, args.seed)
    out_file = Path(args.out_file)
    out_file.parent.mkdir(parents=True, exist_ok=True)
    dataset.write_csv(out_file)
    n_benign, n_malware = dataset.class_counts()
    print(f"wrote {out_file}: {len(dataset)} rows "
          f"({n_benign} benign / {n_malware} malware, {dataset.n_features} features)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnknownSubtypeError as exc:
        print(f"error: unknown subtype {exc.name!r}; valid names: "
              f"{', '.join(exc.available)}", file=sys.stderr)
        return 2
    except MemshieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
