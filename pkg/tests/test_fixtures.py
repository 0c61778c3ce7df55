import numpy as np
import pytest

from memshield import catalog as cat
from memshield.fixtures import FixtureSpec, make_fixture, malmem_profile_spec
from memshield.forest import ForestParams, RandomForestModel, fit_tree, tree_stream_seed
from memshield.splits import stratified_split


def test_fixture_counts_and_labels():
    ds = make_fixture(
        FixtureSpec(n_benign=50, n_per_subtype=20, n_subtypes=2, n_features=4), seed=1
    )
    assert ds.class_counts() == (50, 40)
    assert ds.subtype_counts() == {"Zeus": 20, "Emotet": 20}
    assert len(set(ds.source_rows.tolist())) == len(ds)


def test_fixture_byte_identical_for_same_seed():
    spec = FixtureSpec(n_benign=30, n_per_subtype=30, n_features=6, separation=2.0)
    a = make_fixture(spec, seed=77)
    b = make_fixture(spec, seed=77)
    assert a.X.tobytes() == b.X.tobytes()
    assert make_fixture(spec, seed=78).X.tobytes() != a.X.tobytes()


def test_separable_fixture_supports_perfect_training_fit():
    ds = make_fixture(
        FixtureSpec(n_benign=100, n_per_subtype=100, n_subtypes=1,
                    n_features=5, separation=8.0),
        seed=3,
    )
    params = ForestParams(n_trees=1, bootstrap=False, max_features="all", seed=0)
    tree = fit_tree(ds, params, tree_stream_seed(0, 0))
    model = RandomForestModel([tree], params, ds.feature_names)
    assert (model.predict(ds.X) == ds.y).all()


def test_zero_separation_gives_chance_accuracy():
    ds = make_fixture(
        FixtureSpec(n_benign=400, n_per_subtype=400, n_subtypes=1,
                    n_features=5, separation=0.0),
        seed=4,
    )
    split = stratified_split(ds, 0.25, seed=1)
    from memshield.forest import fit_forest

    model = fit_forest(split.train, ForestParams(n_trees=20, seed=5))
    accuracy = float((model.predict(split.test.X) == split.test.y).mean())
    assert 0.35 < accuracy < 0.65


def test_informative_prefix_controls_signal():
    ds = make_fixture(
        FixtureSpec(n_benign=200, n_per_subtype=200, n_subtypes=1,
                    n_features=6, separation=6.0, n_informative=1),
        seed=5,
    )
    benign = ds.X[ds.y == 0]
    malware = ds.X[ds.y == 1]
    gaps = np.abs(benign.mean(axis=0) - malware.mean(axis=0))
    assert gaps[0] > 4.0
    assert (gaps[1:] < 0.5).all()


def test_malmem_profile_matches_published_counts():
    ds = make_fixture(malmem_profile_spec(), seed=1)
    assert len(ds) == cat.TOTAL_INSTANCES
    assert ds.subtype_counts() == cat.SUBTYPE_COUNTS
    assert ds.feature_names == cat.MALMEM_CATALOG.names
    for name in cat.MALMEM_CATALOG.invariant_names:
        col = ds.X[:, ds.catalog.index(name)]
        assert (col == 0.0).all()


def test_fixture_rejects_bad_spec():
    with pytest.raises(ValueError):
        make_fixture(FixtureSpec(n_benign=0, n_per_subtype=5), seed=1)
    with pytest.raises(ValueError):
        make_fixture(FixtureSpec(n_benign=5, n_per_subtype=5, common_signal=1.5), seed=1)
