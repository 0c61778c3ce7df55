"""Reference classifiers for the stage-1 comparison: decision tree,
Gaussian naive Bayes, k-nearest neighbours, logistic regression.

KNN, NB and LR embed their own min-max scaler (fitted on their training
data), so every model here takes raw feature vectors at prediction time,
matching the forest's interface. The tree consumes raw features directly:
monotone per-feature scaling cannot change it.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, ScalerParams, fit_minmax
from .errors import NotFittedError
from .forest import ForestParams, DecisionTreeModel, _as_matrix, fit_tree

_VARIANCE_FLOOR = 1e-9
_GRADIENT_TOL = 1e-6


@dataclass(frozen=True)
class BaselineKind:
    """Classifier family plus its (deliberately few) hyperparameters."""

    name: str
    k: int = 5
    max_iter: int = 200
    learning_rate: float = 0.1
    l2: float = 0.0

    def __post_init__(self):
        if self.name not in ("decision_tree", "gaussian_nb", "knn", "logistic_regression"):
            raise ValueError(f"unknown baseline kind {self.name!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")

    @classmethod
    def decision_tree(cls) -> "BaselineKind":
        return cls("decision_tree")

    @classmethod
    def gaussian_nb(cls) -> "BaselineKind":
        return cls("gaussian_nb")

    @classmethod
    def knn(cls, k: int = 5) -> "BaselineKind":
        return cls("knn", k=k)

    @classmethod
    def logistic_regression(
        cls, max_iter: int = 200, learning_rate: float = 0.1, l2: float = 0.0
    ) -> "BaselineKind":
        return cls("logistic_regression", max_iter=max_iter, learning_rate=learning_rate, l2=l2)


class _ThresholdMixin:
    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)


@dataclass
class DecisionTreeBaseline(_ThresholdMixin):
    kind: BaselineKind
    feature_names: tuple[str, ...]
    tree: DecisionTreeModel

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict_proba(_as_matrix(X, self.n_features))


@dataclass
class GaussianNBModel(_ThresholdMixin):
    kind: BaselineKind
    feature_names: tuple[str, ...]
    scaler: ScalerParams
    log_priors: np.ndarray  # (2,)
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d), floored

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        Xs = self.scaler.transform(_as_matrix(X, self.n_features))
        out = np.empty((Xs.shape[0], 2))
        for c in (0, 1):
            var = self.variances[c]
            out[:, c] = self.log_priors[c] - 0.5 * np.sum(
                np.log(2.0 * np.pi * var) + (Xs - self.means[c]) ** 2 / var, axis=1
            )
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        jll = self._joint_log_likelihood(X)
        return np.exp(jll[:, 1] - np.logaddexp(jll[:, 0], jll[:, 1]))


@dataclass
class KNNModel(_ThresholdMixin):
    kind: BaselineKind
    feature_names: tuple[str, ...]
    scaler: ScalerParams
    X: np.ndarray  # scaled training matrix
    y: np.ndarray
    source_rows: np.ndarray  # distance tie-break: lower source row wins

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def k(self) -> int:
        return self.kind.k

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Q = self.scaler.transform(_as_matrix(X, self.n_features))
        train_sq = np.einsum("ij,ij->i", self.X, self.X)
        out = np.empty(Q.shape[0])
        chunk = max(1, int(2_000_000 // max(len(self.y), 1)))
        for start in range(0, Q.shape[0], chunk):
            q = Q[start : start + chunk]
            d2 = np.maximum(
                q @ self.X.T * -2.0 + train_sq + np.einsum("ij,ij->i", q, q)[:, None], 0.0
            )
            for i in range(d2.shape[0]):
                row = d2[i]
                kth = np.partition(row, self.k - 1)[self.k - 1]
                cand = np.nonzero(row <= kth)[0]
                order = np.lexsort((self.source_rows[cand], row[cand]))
                chosen = cand[order[: self.k]]
                out[start + i] = float(self.y[chosen].mean())
        return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass
class LogisticRegressionModel(_ThresholdMixin):
    kind: BaselineKind
    feature_names: tuple[str, ...]
    scaler: ScalerParams
    weights: np.ndarray
    bias: float
    n_iterations: int = 0
    final_gradient_norm: float = float("nan")
    loss_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Xs = self.scaler.transform(_as_matrix(X, self.n_features))
        return _sigmoid(Xs @ self.weights + self.bias)


def _logistic_loss(z: np.ndarray, y: np.ndarray, weights, l2: float) -> float:
    # y*softplus(-z) + (1-y)*softplus(z), numerically stable
    per = y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    return float(per.mean() + 0.5 * l2 * np.dot(weights, weights))


def _fit_logistic(kind: BaselineKind, Xs: np.ndarray, y: np.ndarray):
    n, d = Xs.shape
    yf = y.astype(np.float64)
    w = np.zeros(d)
    b = 0.0
    z = Xs @ w + b
    losses = [_logistic_loss(z, yf, w, kind.l2)]
    grad_norm = float("inf")
    iterations = 0
    for _ in range(kind.max_iter):
        p = _sigmoid(z)
        residual = p - yf
        grad_w = Xs.T @ residual / n + kind.l2 * w
        grad_b = float(residual.mean())
        grad_norm = float(np.sqrt(np.dot(grad_w, grad_w) + grad_b * grad_b))
        if grad_norm < _GRADIENT_TOL:
            break
        # halve the step until the move does not increase the loss; keeps the
        # recorded loss sequence non-increasing for any data
        step = kind.learning_rate
        moved = False
        for _ in range(40):
            w_new = w - step * grad_w
            b_new = b - step * grad_b
            z_new = Xs @ w_new + b_new
            loss_new = _logistic_loss(z_new, yf, w_new, kind.l2)
            if loss_new <= losses[-1]:
                moved = True
                break
            step /= 2.0
        if not moved:
            break
        w, b, z = w_new, b_new, z_new
        losses.append(loss_new)
        iterations += 1
    return w, b, iterations, grad_norm, tuple(losses)


def fit_baseline(kind: BaselineKind, train: Dataset, seed: int = 0):
    """Fit one baseline; NB and LR require both labels in the training set."""
    if len(train) == 0:
        raise ValueError("training set is empty")
    n_benign, n_malware = train.class_counts()
    if kind.name == "decision_tree":
        params = ForestParams(n_trees=1, max_features="all", bootstrap=False, seed=seed)
        tree = fit_tree(train, params, tree_seed=seed)
        return DecisionTreeBaseline(kind, train.feature_names, tree)

    scaler = fit_minmax(train)
    Xs = scaler.transform(train.X)
    if kind.name == "gaussian_nb":
        if n_benign == 0 or n_malware == 0:
            raise NotFittedError("GaussianNB needs both classes in the training set")
        log_priors = np.log(np.array([n_benign, n_malware]) / len(train))
        means = np.empty((2, train.n_features))
        variances = np.empty((2, train.n_features))
        for c in (0, 1):
            rows = Xs[train.y == c]
            means[c] = rows.mean(axis=0)
            variances[c] = np.maximum(rows.var(axis=0), _VARIANCE_FLOOR)
        return GaussianNBModel(kind, train.feature_names, scaler, log_priors, means, variances)
    if kind.name == "knn":
        if kind.k > len(train):
            raise ValueError(f"k={kind.k} exceeds training size {len(train)}")
        return KNNModel(
            kind, train.feature_names, scaler, Xs, train.y.copy(), train.source_rows.copy()
        )
    if kind.name == "logistic_regression":
        if n_benign == 0 or n_malware == 0:
            raise NotFittedError("logistic regression needs both classes in the training set")
        w, b, iters, grad_norm, losses = _fit_logistic(kind, Xs, train.y)
        return LogisticRegressionModel(
            kind, train.feature_names, scaler, w, b, iters, grad_norm, losses
        )
    raise ValueError(f"unknown baseline kind {kind.name!r}")


def predict_baseline(model, instance: np.ndarray):
    """Single-instance prediction; same contract as the forest predict op."""
    from .forest import predict

    return predict(model, instance)
