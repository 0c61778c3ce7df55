"""Compact binary model container.

Layout (little-endian throughout): magic "MSHD", u16 format version,
u8 model kind, u16 feature count, a length-prefixed UTF-8 name per feature,
then a kind-specific payload. Forest payloads hold each tree as a pre-order
node list: tag byte, then either (u16 feature, f64 threshold, u32 left,
u32 right) for internal nodes or (u64 benign count, u64 malware count) for
leaves. The byte length of this encoding is the reported model size.
"""

import struct

import numpy as np

from .baselines import (
    BaselineKind,
    DecisionTreeBaseline,
    GaussianNBModel,
    KNNModel,
    LogisticRegressionModel,
)
from .dataset import ScalerParams
from .errors import DecodeError
from .forest import LEAF, DecisionTreeModel, ForestParams, RandomForestModel

MAGIC = b"MSHD"
FORMAT_VERSION = 1

KIND_FOREST = 0
KIND_TREE = 1
KIND_GAUSSIAN_NB = 2
KIND_KNN = 3
KIND_LOGISTIC_REGRESSION = 4

_TAG_LEAF = 0
_TAG_INTERNAL = 1


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError(
                f"truncated stream: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def array(self, dtype, count: int) -> np.ndarray:
        raw = self.take(int(np.dtype(dtype).itemsize) * count)
        return np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes after payload")


def _encode_names(out: bytearray, names) -> None:
    out += struct.pack("<H", len(names))
    for name in names:
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw))
        out += raw


def _decode_names(r: _Reader) -> tuple[str, ...]:
    (count,) = r.unpack("H")
    names = []
    for _ in range(count):
        (length,) = r.unpack("H")
        names.append(r.take(length).decode("utf-8"))
    return tuple(names)


def _encode_tree(out: bytearray, tree: DecisionTreeModel) -> None:
    out += struct.pack("<I", tree.node_count)
    for i in range(tree.node_count):
        if tree.feature[i] == LEAF:
            out += struct.pack("<BQQ", _TAG_LEAF, int(tree.n0[i]), int(tree.n1[i]))
        else:
            out += struct.pack(
                "<BHdII",
                _TAG_INTERNAL,
                int(tree.feature[i]),
                float(tree.threshold[i]),
                int(tree.left[i]),
                int(tree.right[i]),
            )


def _decode_tree(r: _Reader, n_features: int) -> DecisionTreeModel:
    (node_count,) = r.unpack("I")
    if node_count < 1:
        raise DecodeError("tree with zero nodes")
    feature = np.full(node_count, LEAF, dtype=np.int32)
    threshold = np.full(node_count, np.nan)
    left = np.full(node_count, LEAF, dtype=np.int32)
    right = np.full(node_count, LEAF, dtype=np.int32)
    n0 = np.zeros(node_count, dtype=np.int64)
    n1 = np.zeros(node_count, dtype=np.int64)
    for i in range(node_count):
        (tag,) = r.unpack("B")
        if tag == _TAG_LEAF:
            n0[i], n1[i] = r.unpack("QQ")
        elif tag == _TAG_INTERNAL:
            f, thr, l, rt = r.unpack("HdII")
            if f >= n_features:
                raise DecodeError(f"node {i}: feature index {f} out of range")
            if l >= node_count or rt >= node_count or l <= i or rt <= i:
                raise DecodeError(f"node {i}: child offsets ({l}, {rt}) not in pre-order")
            feature[i], threshold[i], left[i], right[i] = f, thr, l, rt
        else:
            raise DecodeError(f"node {i}: unknown tag {tag}")
    # children precede parents in reverse pre-order, so one backward pass
    # rebuilds the internal label counts exactly
    for i in range(node_count - 1, -1, -1):
        if feature[i] != LEAF:
            n0[i] = n0[left[i]] + n0[right[i]]
            n1[i] = n1[left[i]] + n1[right[i]]
    return DecisionTreeModel(feature, threshold, left, right, n0, n1, n_features=n_features)


def _encode_scaler(out: bytearray, scaler: ScalerParams) -> None:
    out += np.ascontiguousarray(scaler.mins, dtype="<f8").tobytes()
    out += np.ascontiguousarray(scaler.maxs, dtype="<f8").tobytes()
    out += np.ascontiguousarray(scaler.degenerate, dtype=np.uint8).tobytes()


def _decode_scaler(r: _Reader, names: tuple[str, ...]) -> ScalerParams:
    d = len(names)
    mins = r.array(np.float64, d)
    maxs = r.array(np.float64, d)
    degenerate = r.array(np.uint8, d).astype(bool)
    return ScalerParams(names, mins, maxs, degenerate)


def serialize(model) -> bytes:
    """Encode a forest or baseline model; the byte length is its size."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    if isinstance(model, RandomForestModel):
        out += struct.pack("<B", KIND_FOREST)
        _encode_names(out, model.feature_names)
        out += struct.pack("<I", len(model.trees))
        for tree in model.trees:
            _encode_tree(out, tree)
    elif isinstance(model, DecisionTreeBaseline):
        out += struct.pack("<B", KIND_TREE)
        _encode_names(out, model.feature_names)
        _encode_tree(out, model.tree)
    elif isinstance(model, GaussianNBModel):
        out += struct.pack("<B", KIND_GAUSSIAN_NB)
        _encode_names(out, model.feature_names)
        _encode_scaler(out, model.scaler)
        out += np.ascontiguousarray(model.log_priors, dtype="<f8").tobytes()
        out += np.ascontiguousarray(model.means, dtype="<f8").tobytes()
        out += np.ascontiguousarray(model.variances, dtype="<f8").tobytes()
    elif isinstance(model, KNNModel):
        out += struct.pack("<B", KIND_KNN)
        _encode_names(out, model.feature_names)
        _encode_scaler(out, model.scaler)
        out += struct.pack("<II", model.k, len(model.y))
        out += np.ascontiguousarray(model.X, dtype="<f8").tobytes()
        out += np.ascontiguousarray(model.y, dtype=np.uint8).tobytes()
        out += np.ascontiguousarray(model.source_rows, dtype="<i8").tobytes()
    elif isinstance(model, LogisticRegressionModel):
        out += struct.pack("<B", KIND_LOGISTIC_REGRESSION)
        _encode_names(out, model.feature_names)
        _encode_scaler(out, model.scaler)
        out += np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
        out += struct.pack("<d", model.bias)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return bytes(out)


def deserialize(data: bytes):
    """Decode bytes produced by serialize; raises DecodeError on malformed
    input or unsupported format versions."""
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise DecodeError("bad magic; not a serialized model")
    (version,) = r.unpack("H")
    if version != FORMAT_VERSION:
        raise DecodeError(f"unsupported format version {version} (supported: {FORMAT_VERSION})")
    (kind,) = r.unpack("B")
    names = _decode_names(r)
    d = len(names)
    if kind == KIND_FOREST:
        (n_trees,) = r.unpack("I")
        if n_trees < 1:
            raise DecodeError("forest with zero trees")
        trees = [_decode_tree(r, d) for _ in range(n_trees)]
        r.done()
        return RandomForestModel(trees, ForestParams(n_trees=n_trees), names)
    if kind == KIND_TREE:
        tree = _decode_tree(r, d)
        r.done()
        return DecisionTreeBaseline(BaselineKind.decision_tree(), names, tree)
    if kind == KIND_GAUSSIAN_NB:
        scaler = _decode_scaler(r, names)
        log_priors = r.array(np.float64, 2)
        means = r.array(np.float64, 2 * d).reshape(2, d)
        variances = r.array(np.float64, 2 * d).reshape(2, d)
        r.done()
        return GaussianNBModel(BaselineKind.gaussian_nb(), names, scaler, log_priors, means, variances)
    if kind == KIND_KNN:
        scaler = _decode_scaler(r, names)
        k, n = r.unpack("II")
        X = r.array(np.float64, n * d).reshape(n, d)
        y = r.array(np.uint8, n).astype(np.int8)
        source_rows = r.array(np.int64, n)
        r.done()
        return KNNModel(BaselineKind.knn(k=k), names, scaler, X, y, source_rows)
    if kind == KIND_LOGISTIC_REGRESSION:
        scaler = _decode_scaler(r, names)
        weights = r.array(np.float64, d)
        (bias,) = r.unpack("d")
        r.done()
        return LogisticRegressionModel(
            BaselineKind.logistic_regression(), names, scaler, weights, float(bias)
        )
    raise DecodeError(f"unknown model kind {kind}")
