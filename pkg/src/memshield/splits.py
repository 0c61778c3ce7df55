"""Seeded train/test splitting: stratified holdout, stratified k-fold, and
the single-subtype transfer partition."""

import math
from dataclasses import dataclass

import numpy as np

from . import catalog as cat
from .dataset import Dataset
from .errors import StratificationError, UnknownSubtypeError
from .seeding import ROLE_PARTITION, ROLE_SPLIT, rng_for

_BENIGN_STRATUM = ""


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset
    spec: str
    seed: int


def _strata(dataset: Dataset) -> list[tuple[str, np.ndarray]]:
    """(name, row indices) per stratum: benign first, then subtypes in
    canonical order."""
    keys = np.where(dataset.y == cat.MALWARE_LABEL, dataset.subtypes, _BENIGN_STRATUM)
    names = sorted(
        set(keys.tolist()),
        key=lambda n: (-1, "") if n == _BENIGN_STRATUM else cat.subtype_order_key(n),
    )
    return [(n, np.nonzero(keys == n)[0]) for n in names]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _stratum_test_sizes(strata, test_fraction: float) -> list[int]:
    """Round-half-up per stratum, then reconcile ±1 to hit the global size."""
    exact = [test_fraction * len(idx) for _, idx in strata]
    sizes = [_round_half_up(e) for e in exact]
    target = _round_half_up(test_fraction * sum(len(idx) for _, idx in strata))
    deficit = target - sum(sizes)
    if deficit:
        rems = [e - math.floor(e) for e in exact]
        if deficit > 0:
            order = sorted(range(len(strata)), key=lambda i: (-rems[i], i))
            eligible = [i for i in order if rems[i] < 0.5 and sizes[i] < len(strata[i][1])]
            eligible += [i for i in order if i not in eligible and sizes[i] < len(strata[i][1])]
            for i in eligible[:deficit]:
                sizes[i] += 1
        else:
            order = sorted(range(len(strata)), key=lambda i: (rems[i], i))
            eligible = [i for i in order if rems[i] >= 0.5 and sizes[i] > 0]
            eligible += [i for i in order if i not in eligible and sizes[i] > 0]
            for i in eligible[: -deficit]:
                sizes[i] -= 1
    return sizes


def stratified_split(dataset: Dataset, test_fraction: float, seed: int) -> Split:
    """Hold out test_fraction of every stratum (benign + each subtype)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    strata = _strata(dataset)
    for name, idx in strata:
        if len(idx) < 2:
            raise StratificationError(
                f"stratum {name or 'benign'!r} has {len(idx)} instance(s); need at least 2"
            )
    sizes = _stratum_test_sizes(strata, test_fraction)
    rng = rng_for(seed, ROLE_SPLIT)
    test_parts = []
    for (name, idx), n_test in zip(strata, sizes):
        test_parts.append(rng.choice(idx, size=n_test, replace=False))
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.zeros(len(dataset), dtype=bool)
    mask[test_idx] = True
    train_idx = np.nonzero(~mask)[0]
    spec = f"stratified holdout, test_fraction={test_fraction}"
    return Split(
        dataset.select(train_idx, f"{dataset.provenance}[train]"),
        dataset.select(test_idx, f"{dataset.provenance}[test]"),
        spec,
        seed,
    )


def stratified_kfold(dataset: Dataset, k: int, seed: int) -> list[Split]:
    """Partition into k folds whose test sets preserve stratum proportions
    within one instance and whose sizes differ by at most one globally."""
    if k < 2:
        raise ValueError("k must be at least 2")
    strata = _strata(dataset)
    for name, idx in strata:
        if len(idx) < k:
            raise StratificationError(
                f"stratum {name or 'benign'!r} has {len(idx)} instances; cannot make {k} folds"
            )
    # Deal the stratum-sorted label sequence round-robin to folds; this fixes
    # per-fold stratum quotas with balanced global fold sizes.
    labels = np.concatenate(
        [np.full(len(idx), s, dtype=np.int32) for s, (_, idx) in enumerate(strata)]
    )
    allocation = np.stack(
        [np.bincount(labels[i::k], minlength=len(strata)) for i in range(k)]
    )
    rng = rng_for(seed, ROLE_SPLIT)
    fold_parts: list[list[np.ndarray]] = [[] for _ in range(k)]
    for s, (_, idx) in enumerate(strata):
        shuffled = rng.permutation(idx)
        offset = 0
        for i in range(k):
            take = int(allocation[i][s])
            fold_parts[i].append(shuffled[offset : offset + take])
            offset += take
    splits = []
    for i in range(k):
        test_idx = np.sort(np.concatenate(fold_parts[i]))
        mask = np.zeros(len(dataset), dtype=bool)
        mask[test_idx] = True
        train_idx = np.nonzero(~mask)[0]
        splits.append(
            Split(
                dataset.select(train_idx, f"{dataset.provenance}[fold{i + 1}-train]"),
                dataset.select(test_idx, f"{dataset.provenance}[fold{i + 1}-test]"),
                f"stratified {k}-fold, fold {i + 1}",
                seed,
            )
        )
    return splits


def subtype_partition(
    dataset: Dataset, subtype: str, train_fraction: float = 0.8, seed: int = 0
) -> Split:
    """Transfer partition: train on one subtype plus an equal seeded benign
    sample; everything else (incl. all other subtypes) is the test set."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    available = dataset.present_subtypes()
    if subtype not in available:
        raise UnknownSubtypeError(subtype, available)
    sub_idx = np.nonzero(dataset.subtypes == subtype)[0]
    benign_idx = np.nonzero(dataset.y == cat.BENIGN_LABEL)[0]
    n_train = int(math.floor(train_fraction * len(sub_idx)))
    if n_train < 1 or n_train >= len(sub_idx):
        raise StratificationError(
            f"subtype {subtype!r} has {len(sub_idx)} instances; "
            f"train_fraction={train_fraction} leaves no train or no holdout"
        )
    if len(benign_idx) < n_train:
        raise StratificationError(
            f"need {n_train} benign instances to balance training, have {len(benign_idx)}"
        )
    rng = rng_for(seed, ROLE_PARTITION)
    train_malware = rng.choice(sub_idx, size=n_train, replace=False)
    train_benign = rng.choice(benign_idx, size=n_train, replace=False)
    train_idx = np.sort(np.concatenate([train_malware, train_benign]))
    mask = np.zeros(len(dataset), dtype=bool)
    mask[train_idx] = True
    test_idx = np.nonzero(~mask)[0]
    spec = f"subtype-transfer {subtype}, train_fraction={train_fraction}"
    return Split(
        dataset.select(train_idx, f"{dataset.provenance}[{subtype}-train]"),
        dataset.select(test_idx, f"{dataset.provenance}[{subtype}-test]"),
        spec,
        seed,
    )
