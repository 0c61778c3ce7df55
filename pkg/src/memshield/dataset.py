"""Dataset ingestion, validation and preprocessing for memory-forensics CSVs.

The expected file layout is the published CIC-MalMem-2022 schema: one
category column, 55 numeric feature columns and one class column. Loading
the full dataset cross-checks the per-subtype counts against the published
distribution; partial files can skip that check.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

from . import catalog as cat
from .catalog import FeatureCatalog, MALMEM_CATALOG
from .errors import (
    CategoryParseError,
    CountValidationError,
    RowParseError,
    SchemaError,
)

_CATEGORY_COLUMN = "category"
_CLASS_COLUMN = "class"

_TYPE_TOKEN = {"TrojanHorse": "Trojan", "Spyware": "Spyware", "Ransomware": "Ransomware"}


@dataclass(frozen=True)
class LabelInfo:
    """Binary label plus malware type/subtype tags (absent for benign)."""

    label: int  # 0 = benign, 1 = malware
    malware_type: str | None = None
    subtype: str | None = None

    def __post_init__(self):
        if self.label not in (cat.BENIGN_LABEL, cat.MALWARE_LABEL):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        benign = self.label == cat.BENIGN_LABEL
        if benign != (self.malware_type is None and self.subtype is None):
            raise ValueError("benign rows carry no type/subtype; malware rows carry both")


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    label_info: LabelInfo
    source_row: int


def parse_category(text: str) -> LabelInfo:
    """Parse one CSV category cell into a LabelInfo.

    Benign rows are the literal "Benign" (case-insensitive, optionally with
    trailing tokens). Malware rows look like "Type-Subtype-<hash>"; the hash
    suffix is ignored.
    """
    if not text or not text.strip():
        raise CategoryParseError(text, "empty category")
    tokens = text.strip().split("-")
    if tokens[0].strip().lower() == "benign":
        return LabelInfo(cat.BENIGN_LABEL)
    if len(tokens) < 2:
        raise CategoryParseError(text, "expected Type-Subtype-... for malware rows")
    malware_type = cat.resolve_malware_type(tokens[0])
    subtype = cat.resolve_subtype(tokens[1])
    if cat.TYPE_OF_SUBTYPE[subtype] != malware_type:
        raise CategoryParseError(
            text, f"subtype {subtype} belongs to {cat.TYPE_OF_SUBTYPE[subtype]}, not {malware_type}"
        )
    return LabelInfo(cat.MALWARE_LABEL, malware_type, subtype)


class Dataset:
    """Immutable collection of labeled feature vectors sharing one catalog."""

    def __init__(
        self,
        catalog: FeatureCatalog,
        X: np.ndarray,
        y: np.ndarray,
        malware_types: np.ndarray,
        subtypes: np.ndarray,
        source_rows: np.ndarray,
        provenance: str = "",
    ):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(catalog):
            raise ValueError(
                f"feature matrix is {X.shape}, catalog has {len(catalog)} entries"
            )
        if not np.isfinite(X).all():
            bad = np.argwhere(~np.isfinite(X))[0]
            raise ValueError(f"non-finite feature value at row {bad[0]}, column {bad[1]}")
        n = X.shape[0]
        y = np.asarray(y, dtype=np.int8)
        for name, arr in (("y", y), ("malware_types", malware_types),
                          ("subtypes", subtypes), ("source_rows", source_rows)):
            if len(arr) != n:
                raise ValueError(f"{name} has length {len(arr)}, expected {n}")
        self.catalog = catalog
        self.X = X
        self.y = y
        self.malware_types = np.asarray(malware_types, dtype="U32")
        self.subtypes = np.asarray(subtypes, dtype="U32")
        self.source_rows = np.asarray(source_rows, dtype=np.int64)
        self.provenance = provenance
        for arr in (self.X, self.y, self.malware_types, self.subtypes, self.source_rows):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.catalog.names

    def class_counts(self) -> tuple[int, int]:
        n_malware = int(self.y.sum())
        return len(self) - n_malware, n_malware

    def subtype_counts(self) -> dict[str, int]:
        names, counts = np.unique(self.subtypes[self.y == cat.MALWARE_LABEL], return_counts=True)
        pairs = {str(n): int(c) for n, c in zip(names, counts)}
        return dict(sorted(pairs.items(), key=lambda kv: cat.subtype_order_key(kv[0])))

    def present_subtypes(self) -> tuple[str, ...]:
        return tuple(self.subtype_counts().keys())

    def instance(self, i: int) -> Instance:
        mt = self.malware_types[i] or None
        st = self.subtypes[i] or None
        return Instance(self.X[i], LabelInfo(int(self.y[i]), mt, st), int(self.source_rows[i]))

    def instances(self) -> Iterator[Instance]:
        for i in range(len(self)):
            yield self.instance(i)

    def select(self, indices: np.ndarray, provenance: str | None = None) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(
            self.catalog,
            self.X[idx],
            self.y[idx],
            self.malware_types[idx],
            self.subtypes[idx],
            self.source_rows[idx],
            provenance if provenance is not None else self.provenance,
        )

    def select_by_source_rows(self, rows: np.ndarray, provenance: str | None = None) -> "Dataset":
        lookup = {int(r): i for i, r in enumerate(self.source_rows)}
        idx = np.array([lookup[int(r)] for r in rows], dtype=np.int64)
        return self.select(idx, provenance)

    def project(self, names: tuple[str, ...]) -> "Dataset":
        """Restrict to the named feature columns, in the given order."""
        cols = [self.catalog.index(n) for n in names]
        return Dataset(
            self.catalog.subset(tuple(names)),
            self.X[:, cols],
            self.y,
            self.malware_types,
            self.subtypes,
            self.source_rows,
            self.provenance,
        )

    def with_features(self, X: np.ndarray, provenance: str | None = None) -> "Dataset":
        """Same rows and labels, replaced feature values (e.g. after scaling)."""
        return Dataset(
            self.catalog,
            X,
            self.y,
            self.malware_types,
            self.subtypes,
            self.source_rows,
            provenance if provenance is not None else self.provenance,
        )

    def category_strings(self) -> list[str]:
        out = []
        for i in range(len(self)):
            if self.y[i] == cat.BENIGN_LABEL:
                out.append("Benign")
            else:
                mt = _TYPE_TOKEN.get(str(self.malware_types[i]), str(self.malware_types[i]))
                out.append(f"{mt}-{self.subtypes[i]}-{int(self.source_rows[i]):08x}")
        return out

    def write_csv(self, path) -> None:
        """Write rows in the ingestion schema (category, features, class)."""
        df = pd.DataFrame(np.asarray(self.X), columns=list(self.feature_names))
        df.insert(0, "Category", self.category_strings())
        df["Class"] = np.where(self.y == cat.MALWARE_LABEL, "Malware", "Benign")
        df.to_csv(path, index=False)


@dataclass
class ScalerParams:
    """Per-feature min/max fitted on a reference (training) dataset."""

    feature_names: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray
    degenerate: np.ndarray  # min == max; such features map to 0
    out_of_range_seen: np.ndarray = field(default=None)  # set when transforming new data

    def __post_init__(self):
        if self.out_of_range_seen is None:
            self.out_of_range_seen = np.zeros(len(self.feature_names), dtype=bool)
        if np.any(self.mins > self.maxs):
            raise ValueError("per-feature min exceeds max")

    def transform(self, X: np.ndarray, record_out_of_range: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = np.where(self.degenerate, 1.0, self.maxs - self.mins)
        out = (X - self.mins) / span
        out[:, self.degenerate] = 0.0
        if record_out_of_range:
            self.out_of_range_seen |= ((out < 0.0) | (out > 1.0)).any(axis=0)
        return out


def fit_minmax(train: Dataset) -> ScalerParams:
    if len(train) == 0:
        raise ValueError("cannot fit a scaler on an empty dataset")
    mins = train.X.min(axis=0)
    maxs = train.X.max(axis=0)
    return ScalerParams(train.feature_names, mins, maxs, mins == maxs)


def fit_apply_minmax(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, ScalerParams]:
    """Fit min-max on train only, apply to both; test values are not clamped."""
    if train.feature_names != test.feature_names:
        raise ValueError("train and test must share one catalog")
    params = fit_minmax(train)
    train_scaled = train.with_features(params.transform(train.X))
    test_scaled = test.with_features(params.transform(test.X, record_out_of_range=True))
    return train_scaled, test_scaled, params


def preprocess(dataset: Dataset) -> Dataset:
    """Drop the invariant-flagged features; idempotent on reduced datasets."""
    flagged = [n for n in dataset.catalog.invariant_names]
    if not flagged:
        return dataset
    keep = tuple(n for n in dataset.feature_names if n not in flagged)
    return dataset.project(keep)


def _find_column(columns, wanted: str) -> str:
    matches = [c for c in columns if c.strip().lower() == wanted]
    if len(matches) != 1:
        raise SchemaError(
            f"expected exactly one {wanted!r} column, found {len(matches)} in {list(columns)[:8]}..."
        )
    return matches[0]


def validate_counts(dataset: Dataset) -> None:
    """Check class balance and per-subtype counts against the published table."""
    n_benign, n_malware = dataset.class_counts()
    problems = []
    if n_benign != cat.BENIGN_COUNT or n_malware != cat.MALWARE_COUNT:
        problems.append(
            f"class counts benign={n_benign}/malware={n_malware}, "
            f"expected {cat.BENIGN_COUNT}/{cat.MALWARE_COUNT}"
        )
    counts = dataset.subtype_counts()
    for name in cat.SUBTYPE_NAMES:
        got = counts.get(name, 0)
        if got != cat.SUBTYPE_COUNTS[name]:
            problems.append(f"{name}: {got}, expected {cat.SUBTYPE_COUNTS[name]}")
    for name in counts:
        if name not in cat.SUBTYPE_COUNTS:
            problems.append(f"unexpected subtype {name}: {counts[name]}")
    if problems:
        raise CountValidationError(
            "subtype counts do not match the published distribution "
            "(pass count_check=False / --no-count-check for partial files):\n  "
            + "\n  ".join(problems)
        )


def load_dataset(path, count_check: bool = True) -> Dataset:
    """Load a memory-forensics CSV into a Dataset.

    With count_check (the default) the per-subtype counts must match the
    published full-dataset distribution exactly.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except Exception as exc:  # pragma: no cover - pandas error text varies
        raise SchemaError(f"cannot read CSV {path}: {exc}") from exc
    if df.shape[1] == 0 or df.shape[0] == 0:
        raise SchemaError(f"{path} has no data rows")

    category_col = _find_column(df.columns, _CATEGORY_COLUMN)
    class_col = _find_column(df.columns, _CLASS_COLUMN)
    feature_cols = [c for c in df.columns if c not in (category_col, class_col)]
    expected = set(MALMEM_CATALOG.names)
    got = set(feature_cols)
    if got != expected:
        missing = sorted(expected - got)
        extra = sorted(got - expected)
        raise SchemaError(
            f"feature columns do not match the 55-feature schema; "
            f"missing={missing[:6]}, unexpected={extra[:6]}"
        )

    frame = df[list(MALMEM_CATALOG.names)].apply(pd.to_numeric, errors="coerce")
    X = frame.to_numpy(dtype=np.float64)
    bad = ~np.isfinite(X)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise RowParseError(int(r), MALMEM_CATALOG.names[c],
                            f"non-numeric value {df.iloc[r][MALMEM_CATALOG.names[c]]!r}")

    n = len(df)
    y = np.zeros(n, dtype=np.int8)
    malware_types = np.full(n, "", dtype="U32")
    subtypes = np.full(n, "", dtype="U32")
    for i, raw in enumerate(df[category_col].to_numpy()):
        try:
            info = parse_category(raw)
        except CategoryParseError as exc:
            raise RowParseError(i, category_col, str(exc)) from exc
        y[i] = info.label
        if info.label == cat.MALWARE_LABEL:
            malware_types[i] = info.malware_type
            subtypes[i] = info.subtype

    class_text = df[class_col].str.strip().str.lower().to_numpy()
    class_labels = np.where(np.isin(class_text, ("malware", "1")), 1,
                            np.where(np.isin(class_text, ("benign", "0")), 0, -1))
    if (class_labels == -1).any():
        r = int(np.argmax(class_labels == -1))
        raise RowParseError(r, class_col, f"unknown class value {df.iloc[r][class_col]!r}")
    if (class_labels != y).any():
        r = int(np.argmax(class_labels != y))
        raise RowParseError(r, class_col, "class column disagrees with category column")

    dataset = Dataset(
        MALMEM_CATALOG, X, y, malware_types, subtypes,
        np.arange(n, dtype=np.int64), provenance=str(path),
    )
    if count_check:
        validate_counts(dataset)
    return dataset
