import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memshield.catalog import FeatureCatalog, FeatureEntry
from memshield.dataset import Dataset, fit_apply_minmax
from memshield.errors import DimensionMismatchError, NotFittedError
from memshield.fixtures import FixtureSpec, make_fixture
from memshield.forest import (
    LEAF,
    ForestParams,
    RandomForestModel,
    find_best_split,
    fit_forest,
    fit_tree,
    gini_impurity,
    mdi_importance,
    permutation_importance,
    predict,
    tree_stream_seed,
)
from memshield.splits import stratified_split

# --- gini ----------------------------------------------------------------------


def test_gini_examples():
    assert gini_impurity((5, 5)) == 0.5
    assert gini_impurity((7, 0)) == 0.0
    assert gini_impurity((3, 1)) == pytest.approx(0.375, abs=1e-15)


def test_gini_rejects_empty():
    with pytest.raises(ValueError):
        gini_impurity((0, 0))


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_gini_bounds_and_purity(n0, n1):
    if n0 + n1 == 0:
        return
    g = gini_impurity((n0, n1))
    assert 0.0 <= g <= 0.5
    assert (g == 0.0) == (n0 == 0 or n1 == 0)


# --- find_best_split ------------------------------------------------------------


def brute_force_best_split(x, y, min_leaf=1):
    """Oracle: enumerate every midpoint and compute the weighted decrease in
    exact rational arithmetic, independent of the vectorized path."""
    from fractions import Fraction

    def gini_frac(n0, n1):
        m = n0 + n1
        return 1 - Fraction(n0 * n0 + n1 * n1, m * m)

    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    m = len(xs)
    parent = gini_frac(int((ys == 0).sum()), int((ys == 1).sum()))
    best = None
    for p in range(1, m):
        if xs[p - 1] == xs[p] or p < min_leaf or m - p < min_leaf:
            continue
        thr = xs[p - 1] + (xs[p] - xs[p - 1]) / 2
        if thr >= xs[p]:
            thr = xs[p - 1]
        left, right = ys[:p], ys[p:]
        gl = gini_frac(int((left == 0).sum()), int((left == 1).sum()))
        gr = gini_frac(int((right == 0).sum()), int((right == 1).sum()))
        dec = parent - Fraction(p, m) * gl - Fraction(m - p, m) * gr
        if best is None or dec > best[0]:  # exact compare; first max keeps smaller thr
            best = (dec, thr)
    return best


def test_split_textbook_example():
    X = np.array([[1.0], [2.0], [8.0], [9.0]])
    y = np.array([0, 0, 1, 1], dtype=np.int8)
    c = find_best_split(X, y, np.arange(4), [0])
    assert c.threshold == 5.0
    assert c.decrease == pytest.approx(0.5, abs=1e-15)


def test_split_none_when_pure():
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.zeros(3, dtype=np.int8)
    assert find_best_split(X, y, np.arange(3), [0]) is None


def test_split_ties_prefer_lower_feature_index():
    # identical columns: identical best gain on both features
    col = np.array([1.0, 2.0, 8.0, 9.0])
    X = np.column_stack([col, col])
    y = np.array([0, 0, 1, 1], dtype=np.int8)
    c = find_best_split(X, y, np.arange(4), [1, 0])
    assert c.feature_index == 0


def test_split_ties_prefer_smaller_threshold():
    # labels alternate so the two boundary splits tie; smaller midpoint wins
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 1, 0, 1], dtype=np.int8)
    c = find_best_split(X, y, np.arange(4), [0])
    oracle = brute_force_best_split(X[:, 0], y)
    assert c.decrease == pytest.approx(oracle[0], abs=1e-12)
    assert c.threshold == 0.5


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_split_matches_brute_force_oracle(data):
    m = data.draw(st.integers(2, 40))
    x = np.array(data.draw(st.lists(
        st.integers(-5, 5), min_size=m, max_size=m))).astype(float)
    y = np.array(data.draw(st.lists(st.integers(0, 1), min_size=m, max_size=m)),
                 dtype=np.int8)
    cand = find_best_split(x.reshape(-1, 1), y, np.arange(m), [0])
    oracle = brute_force_best_split(x, y)
    if oracle is None or oracle[0] == 0:
        assert cand is None
    elif float(oracle[0]) <= 1e-12:
        # inside the float-noise guard band either outcome is acceptable
        assert cand is None or cand.decrease <= float(oracle[0]) + 1e-12
    else:
        assert cand is not None
        assert cand.decrease == pytest.approx(float(oracle[0]), abs=1e-12)
        assert cand.threshold == pytest.approx(oracle[1], abs=0)


def test_split_respects_min_samples_leaf():
    X = np.array([[1.0], [2.0], [8.0], [9.0]])
    y = np.array([0, 0, 1, 1], dtype=np.int8)
    c = find_best_split(X, y, np.arange(4), [0], min_samples_leaf=2)
    assert c.threshold == 5.0  # only the middle boundary leaves 2 per side


# --- fit_tree -------------------------------------------------------------------


def test_single_instance_train_gives_single_leaf():
    catle = FeatureCatalog((FeatureEntry("f0", "Synthetic"),))
    ds = Dataset(catle, np.array([[3.0]]), np.array([1], dtype=np.int8),
                 np.array(["Spyware"]), np.array(["Gator"]), np.array([0]))
    tree = fit_tree(ds, ForestParams(n_trees=1, bootstrap=False, seed=0), 1)
    assert tree.node_count == 1
    assert tree.feature[0] == LEAF
    assert tree.predict_proba(np.array([[123.0]]))[0] == 1.0


def test_tree_determinism(binary_ds):
    params = ForestParams(n_trees=1, seed=0)
    a = fit_tree(binary_ds, params, 42)
    b = fit_tree(binary_ds, params, 42)
    assert np.array_equal(a.feature, b.feature)
    assert np.array_equal(a.threshold, b.threshold, equal_nan=True)
    assert np.array_equal(a.n0, b.n0) and np.array_equal(a.n1, b.n1)


def test_tree_max_depth_respected(binary_ds):
    tree = fit_tree(binary_ds, ForestParams(max_depth=2, seed=0), 7)
    assert tree.max_depth <= 2


def test_tree_min_samples_leaf_respected(overlap_ds):
    tree = fit_tree(overlap_ds, ForestParams(min_samples_leaf=10, seed=0), 3)
    leaves = tree.feature == LEAF
    assert ((tree.n0 + tree.n1)[leaves] >= 10).all()


def test_every_split_strictly_decreases_impurity(overlap_ds):
    for seed in (1, 2, 3):
        tree = fit_tree(overlap_ds, ForestParams(seed=0), seed)
        internal = tree.feature != LEAF
        assert (tree.decrease[internal] > 0).all()


# --- forest ---------------------------------------------------------------------


def test_single_tree_forest_equals_its_tree(binary_ds):
    params = ForestParams(n_trees=1, bootstrap=False, seed=9)
    forest = fit_forest(binary_ds, params)
    tree_probs = forest.trees[0].predict_proba(binary_ds.X)
    assert np.array_equal(forest.predict_proba(binary_ds.X), tree_probs)


def test_forest_probability_is_mean_of_tree_probabilities(overlap_ds):
    forest = fit_forest(overlap_ds, ForestParams(n_trees=7, seed=4))
    X = overlap_ds.X[:100]
    stacked = np.stack([t.predict_proba(X) for t in forest.trees])
    np.testing.assert_array_equal(forest.predict_proba(X), stacked.mean(axis=0))
    probs = forest.predict_proba(X)
    assert probs.min() >= 0.0 and probs.max() <= 1.0


def test_per_tree_seed_derivation_is_order_independent(binary_ds):
    params = ForestParams(n_trees=5, seed=123)
    forest = fit_forest(binary_ds, params)
    # refit individual trees out of order; streams depend only on (seed, i)
    for i in (3, 0, 4, 1, 2):
        lone = fit_tree(binary_ds, params, tree_stream_seed(123, i))
        assert np.array_equal(lone.feature, forest.trees[i].feature)
        assert np.array_equal(lone.threshold, forest.trees[i].threshold, equal_nan=True)


def test_boundary_probability_is_malware():
    # two stumps voting 0.2 and 0.8 average to exactly 0.5
    catle = FeatureCatalog((FeatureEntry("f0", "Synthetic"),))

    def stump(p_left):
        n1 = int(p_left * 10)
        return _manual_tree(
            feature=[0, LEAF, LEAF], threshold=[0.5, np.nan, np.nan],
            left=[1, LEAF, LEAF], right=[2, LEAF, LEAF],
            n0=[10, 10 - n1, 0], n1=[10, n1, 10], n_features=1,
        )

    forest = RandomForestModel([stump(0.2), stump(0.8)], ForestParams(n_trees=2), ("f0",))
    x = np.array([[0.0]])
    assert forest.predict_proba(x)[0] == 0.5
    assert forest.predict(x)[0] == 1  # fail-closed boundary rule
    single = predict(forest, x[0])
    assert single.label == 1 and single.probability_malware == 0.5


def _manual_tree(feature, threshold, left, right, n0, n1, n_features):
    from memshield.forest import DecisionTreeModel

    return DecisionTreeModel(
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(n0, dtype=np.int64),
        np.array(n1, dtype=np.int64),
        n_features=n_features,
    )


def test_unanimous_benign_leaves_give_zero_probability(binary_ds):
    forest = fit_forest(binary_ds, ForestParams(n_trees=5, seed=2))
    benign_like = binary_ds.X[binary_ds.y == 0][:20]
    probs = forest.predict_proba(benign_like)
    assert (probs < 0.5).all()
    franken = RandomForestModel(
        [_manual_tree([LEAF], [np.nan], [LEAF], [LEAF], [4], [0], 2)] * 3,
        ForestParams(n_trees=3),
        ("a", "b"),
    )
    assert (franken.predict_proba(np.zeros((5, 2))) == 0.0).all()


def test_predict_dimension_mismatch(binary_ds):
    forest = fit_forest(binary_ds, ForestParams(n_trees=2, seed=2))
    with pytest.raises(DimensionMismatchError):
        forest.predict_proba(np.zeros((3, binary_ds.n_features + 1)))
    with pytest.raises(DimensionMismatchError):
        predict(forest, np.zeros(binary_ds.n_features + 1))


def test_hard_vote_option(overlap_ds):
    forest = fit_forest(overlap_ds, ForestParams(n_trees=9, seed=6))
    X = overlap_ds.X[:50]
    hard = forest.predict(X, hard_vote=True)
    votes = np.stack([(t.predict_proba(X) >= 0.5) for t in forest.trees]).mean(axis=0)
    assert np.array_equal(hard, (votes >= 0.5).astype(np.int8))


# --- importances ----------------------------------------------------------------


def test_mdi_concentrates_on_the_informative_feature():
    ds = make_fixture(
        FixtureSpec(n_benign=300, n_per_subtype=300, n_subtypes=1,
                    n_features=5, separation=6.0, n_informative=1),
        seed=11,
    )
    forest = fit_forest(ds, ForestParams(n_trees=20, seed=1))
    ranking = mdi_importance(forest)
    assert ranking.names[0] == "synth.f00"
    assert dict(ranking.entries)["synth.f00"] > 0.9
    # cross-check with the permutation alternative
    perm = permutation_importance(forest, ds, seed=3, n_repeats=3)
    assert perm.names[0] == "synth.f00"


def test_mdi_scores_sum_to_one(multi_ds):
    forest = fit_forest(multi_ds, ForestParams(n_trees=10, seed=5))
    ranking = mdi_importance(forest)
    assert sum(ranking.scores) == pytest.approx(1.0, abs=1e-12)
    assert all(s >= 0 for s in ranking.scores)
    assert list(ranking.scores) == sorted(ranking.scores, reverse=True)


def test_constant_feature_scores_zero():
    ds = make_fixture(
        FixtureSpec(n_benign=200, n_per_subtype=200, n_subtypes=1,
                    n_features=4, separation=5.0),
        seed=12,
    )
    X = np.array(ds.X)
    X[:, 2] = 7.0  # constant: never splittable
    ds2 = Dataset(ds.catalog, X, ds.y, ds.malware_types, ds.subtypes, ds.source_rows)
    forest = fit_forest(ds2, ForestParams(n_trees=10, seed=3))
    scores = dict(mdi_importance(forest).entries)
    assert scores["synth.f02"] == 0.0


def test_mdi_requires_at_least_one_split():
    catle = FeatureCatalog((FeatureEntry("f0", "Synthetic"),))
    ds = Dataset(catle, np.zeros((10, 1)), np.zeros(10, dtype=np.int8),
                 np.full(10, "", "U32"), np.full(10, "", "U32"), np.arange(10))
    forest = fit_forest(ds, ForestParams(n_trees=3, seed=1))
    with pytest.raises(NotFittedError):
        mdi_importance(forest)


def test_importance_ranking_tie_break_is_lower_index_first():
    from memshield.forest import _rank

    ranking = _rank(("b_feat", "a_feat", "c_feat"), np.array([0.4, 0.4, 0.2]))
    assert ranking.names == ("b_feat", "a_feat", "c_feat")


# --- scaling invariance ----------------------------------------------------------


def test_minmax_scaling_does_not_change_predictions(overlap_ds):
    split = stratified_split(overlap_ds, 0.3, seed=21)
    train_s, test_s, _ = fit_apply_minmax(split.train, split.test)
    params = ForestParams(n_trees=15, seed=9)
    raw_labels = fit_forest(split.train, params).predict(split.test.X)
    scaled_labels = fit_forest(train_s, params).predict(test_s.X)
    assert np.array_equal(raw_labels, scaled_labels)
