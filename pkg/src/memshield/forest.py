"""CART decision trees and random forest, built from scratch on numpy.

Determinism contract: (dataset, params, seed) fully determine the model.
Tree i draws its RNG stream from (params.seed, i), so training order and
worker count cannot change results. Tie-breaks are fixed everywhere: equal
split gains go to the lower feature index, then the smaller threshold.
Routing rule: an instance goes left iff feature value <= threshold.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatchError, NotFittedError

LEAF = -1

# gains at or below this are float noise around a mathematically zero
# decrease; such splits are rejected rather than grown
_MIN_DECREASE = 1e-12


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: int | str = "sqrt"  # "sqrt", "all", or a fixed count
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    bootstrap: bool = True  # sample size n, with replacement
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if isinstance(self.max_features, str):
            if self.max_features not in ("sqrt", "all"):
                raise ValueError("max_features must be 'sqrt', 'all', or an int")
        elif self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(math.floor(math.sqrt(n_features))))
        if self.max_features == "all":
            return n_features
        return min(int(self.max_features), n_features)


def gini_impurity(label_counts: tuple[int, int]) -> float:
    """Gini impurity of a binary count pair; 0 iff pure, 0.5 when balanced."""
    n0, n1 = label_counts
    total = n0 + n1
    if total < 1 or n0 < 0 or n1 < 0:
        raise ValueError(f"invalid label counts {label_counts}")
    p0 = n0 / total
    p1 = n1 / total
    return 1.0 - p0 * p0 - p1 * p1


@dataclass(frozen=True)
class SplitCandidate:
    feature_index: int
    threshold: float
    decrease: float  # node-local weighted impurity decrease


@dataclass(frozen=True)
class TreeNode:
    """Read-only view of one node in a fitted tree."""

    feature_index: int | None
    threshold: float | None
    left: int | None
    right: int | None
    impurity_decrease: float | None
    n_samples: int
    label_counts: tuple[int, int]

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


_CONSTANT = "constant"
_NO_VALID = "no-valid-split"


def _scan_feature(values, labels, min_leaf, parent_gini, total_malware):
    """Best midpoint split of one feature column, or a sentinel.

    Candidates are midpoints between consecutive distinct sorted values;
    ties on gain go to the smallest threshold (first max in sorted order).
    """
    order = np.argsort(values, kind="stable")
    vs = values[order]
    if vs[0] == vs[-1]:
        return _CONSTANT
    m = vs.size
    ys = labels[order]
    left_sizes = np.arange(1, m, dtype=np.float64)
    right_sizes = m - left_sizes
    valid = (vs[1:] > vs[:-1]) \
        & (left_sizes >= min_leaf) & (right_sizes >= min_leaf)
    if not valid.any():
        return _NO_VALID
    n1_left = np.cumsum(ys, dtype=np.int64)[: m - 1].astype(np.float64)
    n0_left = left_sizes - n1_left
    n1_right = total_malware - n1_left
    n0_right = right_sizes - n1_right
    gini_left = 1.0 - (n0_left * n0_left + n1_left * n1_left) / (left_sizes * left_sizes)
    gini_right = 1.0 - (n0_right * n0_right + n1_right * n1_right) / (right_sizes * right_sizes)
    weighted = (left_sizes / m) * gini_left + (right_sizes / m) * gini_right
    decrease = parent_gini - weighted
    decrease[~valid] = -np.inf
    pos = int(np.argmax(decrease))
    a, b = float(vs[pos]), float(vs[pos + 1])
    threshold = a + (b - a) / 2.0
    if threshold >= b:  # adjacent floats: keep b strictly on the right side
        threshold = a
    return float(decrease[pos]), threshold


def _better(decrease, feature, threshold, best: SplitCandidate | None) -> bool:
    if best is None:
        return True
    if decrease != best.decrease:
        return decrease > best.decrease
    if feature != best.feature_index:
        return feature < best.feature_index
    return threshold < best.threshold


def find_best_split(
    X: np.ndarray,
    y: np.ndarray,
    sample_indices: np.ndarray,
    feature_indices,
    min_samples_leaf: int = 1,
    min_samples_split: int = 2,
) -> SplitCandidate | None:
    """Best (feature, midpoint threshold) over the given candidate features.

    Returns None when no candidate yields children respecting
    min_samples_leaf or when every candidate has zero gain.
    """
    idx = np.asarray(sample_indices)
    if len(idx) < min_samples_split:
        return None
    feats = sorted(int(f) for f in feature_indices)
    if not feats:
        raise ValueError("feature subset must be non-empty")
    labels = y[idx]
    total_malware = int(labels.sum())
    parent_gini = gini_impurity((len(idx) - total_malware, total_malware))
    best = None
    for f in feats:
        res = _scan_feature(X[idx, f], labels, min_samples_leaf, parent_gini, total_malware)
        if res is _CONSTANT or res is _NO_VALID:
            continue
        decrease, threshold = res
        if decrease > _MIN_DECREASE and _better(decrease, f, threshold, best):
            best = SplitCandidate(f, threshold, decrease)
    return best


@dataclass
class DecisionTreeModel:
    """Flat pre-order node arrays; LEAF (-1) marks leaves in `feature`."""

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64, NaN at leaves
    left: np.ndarray  # int32 child positions, -1 at leaves
    right: np.ndarray
    n0: np.ndarray  # int64 per-node benign count (bootstrap sample)
    n1: np.ndarray  # int64 per-node malware count
    n_features: int
    decrease: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.decrease is None:
            self.decrease = _node_decreases(self.feature, self.left, self.right, self.n0, self.n1)
        if (self.feature[self.feature != LEAF] >= self.n_features).any():
            raise ValueError("split feature index out of range")
        self._leaf_prob = np.where(
            self.n0 + self.n1 > 0, self.n1 / np.maximum(self.n0 + self.n1, 1), 0.0
        )

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def max_depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int32)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max()) if self.node_count else 0

    def node(self, i: int) -> TreeNode:
        counts = (int(self.n0[i]), int(self.n1[i]))
        if self.feature[i] == LEAF:
            return TreeNode(None, None, None, None, None, sum(counts), counts)
        return TreeNode(
            int(self.feature[i]),
            float(self.threshold[i]),
            int(self.left[i]),
            int(self.right[i]),
            float(self.decrease[i]),
            sum(counts),
            counts,
        )

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            rows = np.nonzero(self.feature[node] != LEAF)[0]
            if rows.size == 0:
                return node
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Malware fraction of the reached leaf, per row."""
        X = _as_matrix(X, self.n_features)
        return self._leaf_prob[self.apply(X)]


def _node_decreases(feature, left, right, n0, n1) -> np.ndarray:
    """Node-local weighted impurity decrease; exactly reconstructible from
    the per-node label counts, so it survives serialization."""
    n = (n0 + n1).astype(np.float64)
    safe_n = np.maximum(n, 1.0)
    gini = 1.0 - (n0.astype(np.float64) ** 2 + n1.astype(np.float64) ** 2) / (safe_n * safe_n)
    dec = np.zeros(len(feature), dtype=np.float64)
    internal = feature != LEAF
    if internal.any():
        l, r = left[internal], right[internal]
        dec[internal] = gini[internal] - (n[l] / n[internal]) * gini[l] - (
            n[r] / n[internal]
        ) * gini[r]
    return dec


def _grow(Xb: np.ndarray, yb: np.ndarray, params: ForestParams, rng) -> DecisionTreeModel:
    n, d = Xb.shape
    max_feat = params.resolve_max_features(d)
    feature, threshold, left, right, n0s, n1s = [], [], [], [], [], []
    stack = [(np.arange(n, dtype=np.int64), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left_child = stack.pop()
        pos = len(feature)
        if parent >= 0:
            if is_left_child:
                left[parent] = pos
            else:
                right[parent] = pos
        labels = yb[idx]
        c1 = int(labels.sum())
        c0 = len(idx) - c1
        choice = None
        if (
            c0 > 0
            and c1 > 0
            and len(idx) >= params.min_samples_split
            and (params.max_depth is None or depth < params.max_depth)
        ):
            choice = _choose_split(Xb, labels, idx, rng, max_feat, params.min_samples_leaf, c0, c1)
        if choice is None:
            feature.append(LEAF)
            threshold.append(np.nan)
            left.append(LEAF)
            right.append(LEAF)
            n0s.append(c0)
            n1s.append(c1)
            continue
        f, thr = choice
        feature.append(f)
        threshold.append(thr)
        left.append(-2)  # patched when the child is emitted
        right.append(-2)
        n0s.append(c0)
        n1s.append(c1)
        go_left = Xb[idx, f] <= thr
        stack.append((idx[~go_left], depth + 1, pos, False))
        stack.append((idx[go_left], depth + 1, pos, True))
    return DecisionTreeModel(
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(n0s, dtype=np.int64),
        np.array(n1s, dtype=np.int64),
        n_features=d,
    )


def _choose_split(Xb, labels, idx, rng, max_feat, min_leaf, c0, c1):
    """Walk a seeded feature permutation until max_feat non-constant features
    have been scanned; constant-in-node features do not consume a slot."""
    parent_gini = gini_impurity((c0, c1))
    total_malware = c1
    best = None
    evaluated = 0
    for f in rng.permutation(Xb.shape[1]):
        res = _scan_feature(Xb[idx, f], labels, min_leaf, parent_gini, total_malware)
        if res is _CONSTANT:
            continue
        evaluated += 1
        if res is not _NO_VALID:
            decrease, thr = res
            if decrease > _MIN_DECREASE and _better(decrease, f, thr, best):
                best = SplitCandidate(int(f), thr, decrease)
        if evaluated >= max_feat:
            break
    if best is None:
        return None
    return best.feature_index, best.threshold


def tree_stream_seed(seed: int, tree_index: int) -> int:
    """Integer seed of tree `tree_index`'s RNG stream, derived from
    (forest seed, tree index) only."""
    ss = np.random.SeedSequence(entropy=(seed, tree_index))
    return int(ss.generate_state(1)[0])


def fit_tree(train: Dataset, params: ForestParams, tree_seed: int) -> DecisionTreeModel:
    """Grow one CART tree; the bootstrap draw (when enabled) comes first in
    the stream, then one feature permutation per node in pre-order."""
    if len(train) == 0:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(np.random.SeedSequence(tree_seed))
    X = train.X
    y = train.y
    if params.bootstrap:
        rows = rng.integers(0, len(train), size=len(train))
        Xb, yb = X[rows], y[rows]
    else:
        Xb, yb = X, y
    return _grow(np.asfortranarray(Xb), yb, params, rng)


@dataclass
class RandomForestModel:
    trees: list[DecisionTreeModel]
    params: ForestParams
    feature_names: tuple[str, ...]

    def __post_init__(self):
        self.feature_names = tuple(self.feature_names)
        for t in self.trees:
            if t.n_features != len(self.feature_names):
                raise ValueError("all trees must share the forest's feature count")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def node_count(self) -> int:
        return sum(t.node_count for t in self.trees)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Soft vote: mean of per-tree leaf malware fractions."""
        X = _as_matrix(X, self.n_features)
        out = np.zeros(X.shape[0], dtype=np.float64)
        for t in self.trees:
            out += t.predict_proba(X)
        return out / len(self.trees)

    def predict(self, X: np.ndarray, hard_vote: bool = False) -> np.ndarray:
        """Labels under the fail-closed boundary rule (p == 0.5 -> malware)."""
        if hard_vote:
            X = _as_matrix(X, self.n_features)
            votes = np.zeros(X.shape[0], dtype=np.float64)
            for t in self.trees:
                votes += (t.predict_proba(X) >= 0.5).astype(np.float64)
            return (votes / len(self.trees) >= 0.5).astype(np.int8)
        return (self.predict_proba(X) >= 0.5).astype(np.int8)


@dataclass(frozen=True)
class Prediction:
    label: int
    probability_malware: float


def predict(model, instance: np.ndarray) -> Prediction:
    """Single-instance prediction for any model with predict_proba."""
    x = np.asarray(instance, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D feature vector, got shape {x.shape}")
    p = float(model.predict_proba(x.reshape(1, -1))[0])
    return Prediction(int(p >= 0.5), p)


def fit_forest(train: Dataset, params: ForestParams) -> RandomForestModel:
    trees = [
        fit_tree(train, params, tree_stream_seed(params.seed, i))
        for i in range(params.n_trees)
    ]
    return RandomForestModel(trees, params, train.feature_names)


@dataclass(frozen=True)
class ImportanceRanking:
    """Features ranked by a non-negative score; ties break on lower index."""

    entries: tuple[tuple[str, float], ...]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    @property
    def scores(self) -> tuple[float, ...]:
        return tuple(score for _, score in self.entries)

    def truncate(self, k: int) -> "ImportanceRanking":
        if k > len(self.entries):
            raise ValueError(f"cannot take top {k} of {len(self.entries)} features")
        return ImportanceRanking(self.entries[:k])


def _rank(feature_names, scores) -> ImportanceRanking:
    order = np.lexsort((np.arange(len(scores)), -np.asarray(scores)))
    return ImportanceRanking(
        tuple((feature_names[i], float(scores[i])) for i in order)
    )


def mdi_importance(model: RandomForestModel) -> ImportanceRanking:
    """Mean decrease in impurity: per tree, sum (n_node/n_root) * decrease
    over internal nodes per feature; average across trees; normalize to 1."""
    d = model.n_features
    raw = np.zeros(d, dtype=np.float64)
    for t in model.trees:
        internal = t.feature != LEAF
        if not internal.any():
            continue
        n = (t.n0 + t.n1).astype(np.float64)
        contrib = (n[internal] / n[0]) * t.decrease[internal]
        np.add.at(raw, t.feature[internal], contrib)
    raw /= len(model.trees)
    total = raw.sum()
    if total <= 0.0:
        raise NotFittedError("forest has no splits; importance is undefined")
    return _rank(model.feature_names, raw / total)


def permutation_importance(
    model, dataset: Dataset, seed: int, n_repeats: int = 5
) -> ImportanceRanking:
    """Alternative ranking: mean accuracy drop when one feature column is
    shuffled. Negative drops clip to zero before normalizing."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed,)))
    X, y = dataset.X, dataset.y
    base = float((model.predict(X) == y).mean())
    drops = np.zeros(dataset.n_features)
    for j in range(dataset.n_features):
        acc = 0.0
        for _ in range(n_repeats):
            Xp = X.copy()
            Xp[:, j] = Xp[rng.permutation(len(Xp)), j]
            acc += float((model.predict(Xp) == y).mean())
        drops[j] = base - acc / n_repeats
    drops = np.clip(drops, 0.0, None)
    total = drops.sum()
    if total > 0:
        drops = drops / total
    return _rank(dataset.feature_names, drops)


def _as_matrix(X: np.ndarray, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DimensionMismatchError(
            f"expected {n_features} features, got matrix of shape {X.shape}"
        )
    return X
