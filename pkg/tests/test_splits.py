import math

import numpy as np
import pytest

from memshield import catalog as cat
from memshield.errors import StratificationError, UnknownSubtypeError
from memshield.fixtures import FixtureSpec, make_fixture, malmem_profile_spec
from memshield.splits import stratified_kfold, stratified_split, subtype_partition


def _strata_sizes(ds):
    sizes = dict(ds.subtype_counts())
    sizes[""] = ds.class_counts()[0]
    return sizes


# --- stratified_split ----------------------------------------------------------


def test_split_disjoint_and_covering(multi_ds):
    split = stratified_split(multi_ds, 0.2, seed=1)
    train_rows = set(split.train.source_rows.tolist())
    test_rows = set(split.test.source_rows.tolist())
    assert not train_rows & test_rows
    assert train_rows | test_rows == set(multi_ds.source_rows.tolist())


def test_split_deterministic(multi_ds):
    a = stratified_split(multi_ds, 0.2, seed=9)
    b = stratified_split(multi_ds, 0.2, seed=9)
    assert np.array_equal(a.test.source_rows, b.test.source_rows)
    c = stratified_split(multi_ds, 0.2, seed=10)
    assert not np.array_equal(a.test.source_rows, c.test.source_rows)


def test_split_per_stratum_share_is_rounded(multi_ds):
    frac = 0.25
    split = stratified_split(multi_ds, frac, seed=3)
    full = _strata_sizes(multi_ds)
    test_sizes = _strata_sizes(split.test)
    for name, n in full.items():
        expected = math.floor(frac * n + 0.5)
        assert abs(test_sizes.get(name, 0) - expected) <= 1, name


def test_split_hits_global_target_exactly():
    # published-shaped counts scaled down: rounding must reconcile globally
    ds = make_fixture(malmem_profile_spec(scale=0.05), seed=4)
    split = stratified_split(ds, 0.2, seed=5)
    assert len(split.test) == math.floor(0.2 * len(ds) + 0.5)


def test_split_transponder_share_at_published_scale():
    # Transponder count 2410 at fraction 0.2 gives exactly 482 test rows
    ds = make_fixture(
        FixtureSpec(n_benign=2500, n_per_subtype={"Transponder": 2410, "Zeus": 500},
                    n_features=4, separation=3.0),
        seed=6,
    )
    split = stratified_split(ds, 0.2, seed=7)
    assert split.test.subtype_counts()["Transponder"] == 482


def test_split_rejects_tiny_strata():
    ds = make_fixture(
        FixtureSpec(n_benign=50, n_per_subtype={"Zeus": 1}, n_features=3), seed=1
    )
    with pytest.raises(StratificationError, match="Zeus"):
        stratified_split(ds, 0.5, seed=1)


def test_split_rejects_bad_fraction(multi_ds):
    with pytest.raises(ValueError):
        stratified_split(multi_ds, 0.0, seed=1)
    with pytest.raises(ValueError):
        stratified_split(multi_ds, 1.0, seed=1)


# --- stratified_kfold ----------------------------------------------------------


def test_kfold_partitions_dataset(multi_ds):
    folds = stratified_kfold(multi_ds, 4, seed=2)
    all_test = np.sort(np.concatenate([f.test.source_rows for f in folds]))
    assert np.array_equal(all_test, np.sort(multi_ds.source_rows))
    for f in folds:
        assert not set(f.train.source_rows.tolist()) & set(f.test.source_rows.tolist())
        assert len(f.train) + len(f.test) == len(multi_ds)


def test_kfold_sizes_balanced():
    ds = make_fixture(malmem_profile_spec(scale=0.02), seed=8)
    k = 10
    folds = stratified_kfold(ds, k, seed=9)
    sizes = sorted(len(f.test) for f in folds)
    assert sum(sizes) == len(ds)
    assert sizes[-1] - sizes[0] <= 1  # global fold sizes differ by at most one


def test_kfold_preserves_stratum_proportion(multi_ds):
    k = 5
    folds = stratified_kfold(multi_ds, k, seed=1)
    full = _strata_sizes(multi_ds)
    for f in folds:
        fold_sizes = _strata_sizes(f.test)
        for name, n in full.items():
            assert abs(fold_sizes.get(name, 0) - n / k) <= 1, name


def test_kfold_two_strata_forced_partition():
    ds = make_fixture(
        FixtureSpec(n_benign=2, n_per_subtype={"Zeus": 2}, n_features=3), seed=3
    )
    folds = stratified_kfold(ds, 2, seed=4)
    for f in folds:
        counts = _strata_sizes(f.test)
        assert counts[""] == 1 and counts["Zeus"] == 1


def test_kfold_errors_name_the_small_stratum():
    ds = make_fixture(
        FixtureSpec(n_benign=30, n_per_subtype={"Gator": 3}, n_features=3), seed=3
    )
    with pytest.raises(StratificationError, match="Gator"):
        stratified_kfold(ds, 5, seed=0)
    with pytest.raises(ValueError):
        stratified_kfold(ds, 1, seed=0)


def test_kfold_deterministic(multi_ds):
    a = stratified_kfold(multi_ds, 3, seed=11)
    b = stratified_kfold(multi_ds, 3, seed=11)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.test.source_rows, fb.test.source_rows)


# --- subtype_partition ----------------------------------------------------------


def test_partition_balanced_training(multi_ds):
    split = subtype_partition(multi_ds, "Zeus", 0.8, seed=5)
    n_benign, n_malware = split.train.class_counts()
    assert n_benign == n_malware == math.floor(0.8 * 120)
    assert set(split.train.subtype_counts()) == {"Zeus"}


def test_partition_test_holds_every_other_subtype(multi_ds):
    split = subtype_partition(multi_ds, "Zeus", 0.8, seed=5)
    counts = split.test.subtype_counts()
    full = multi_ds.subtype_counts()
    for name in full:
        if name != "Zeus":
            assert counts[name] == full[name]
    assert counts["Zeus"] == full["Zeus"] - math.floor(0.8 * full["Zeus"])


def test_partition_disjoint_and_covering(multi_ds):
    split = subtype_partition(multi_ds, "Emotet", 0.8, seed=6)
    rows = np.sort(np.concatenate([split.train.source_rows, split.test.source_rows]))
    assert np.array_equal(rows, np.sort(multi_ds.source_rows))


def test_partition_sizes_at_published_scale():
    # 2410 Transponder rows at 0.8 -> 1928 + 1928 train, rest to test
    ds = make_fixture(
        FixtureSpec(n_benign=3000, n_per_subtype={"Transponder": 2410, "TIBS": 1410},
                    n_features=4, separation=3.0),
        seed=6,
    )
    split = subtype_partition(ds, "Transponder", 0.8, seed=1)
    assert len(split.train) == 2 * 1928
    tibs = subtype_partition(ds, "TIBS", 0.8, seed=1)
    assert len(tibs.train) == 2 * 1128


def test_partition_deterministic(multi_ds):
    a = subtype_partition(multi_ds, "Zeus", 0.8, seed=3)
    b = subtype_partition(multi_ds, "Zeus", 0.8, seed=3)
    assert np.array_equal(a.train.source_rows, b.train.source_rows)


def test_partition_unknown_subtype(multi_ds):
    with pytest.raises(UnknownSubtypeError) as err:
        subtype_partition(multi_ds, "NotASubtype", 0.8, seed=1)
    assert "Zeus" in err.value.available


def test_partition_needs_enough_benign():
    ds = make_fixture(
        FixtureSpec(n_benign=10, n_per_subtype={"Zeus": 100}, n_features=3), seed=2
    )
    with pytest.raises(StratificationError, match="benign"):
        subtype_partition(ds, "Zeus", 0.8, seed=0)
