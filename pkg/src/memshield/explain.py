"""Exact interventional Shapley attributions for model probabilities.

The value of a feature coalition S is the model's mean probability over a
background sample with the coalition's features pinned to the explained
instance. All 2^k coalitions are enumerated, so the attributions are exact:
base value plus the per-feature contributions reproduces the prediction to
float precision, and features no tree ever splits on get exactly zero.
"""

import hashlib
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatchError, ShapleyCapError
from .seeding import ROLE_BACKGROUND, rng_for

SHAPLEY_FEATURE_CAP = 20
_MASK_CHUNK = 2_048


@dataclass(frozen=True)
class BackgroundSample:
    """Reference rows standing in for "feature absent" (default 100, drawn
    seeded from the experiment's training set)."""

    X: np.ndarray
    feature_names: tuple[str, ...]
    seed: int
    source: str = ""

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValueError("background needs at least one instance")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("background width does not match its feature names")

    @property
    def size(self) -> int:
        return self.X.shape[0]


def draw_background(train: Dataset, size: int = 100, seed: int = 0) -> BackgroundSample:
    if size < 1:
        raise ValueError("background size must be >= 1")
    take = min(size, len(train))
    rng = rng_for(seed, ROLE_BACKGROUND)
    rows = np.sort(rng.choice(len(train), size=take, replace=False))
    return BackgroundSample(
        np.array(train.X[rows]), train.feature_names, seed, train.provenance
    )


@dataclass(frozen=True)
class Attribution:
    base_value: float  # mean model probability over the background
    phi: np.ndarray  # per-feature contributions, probability units
    prediction: float
    feature_names: tuple[str, ...]
    feature_values: np.ndarray
    instance_ref: int = -1  # source row when known

    def __post_init__(self):
        if len(self.phi) != len(self.feature_names):
            raise ValueError("phi length does not match feature names")


def coalition_values(model, instance: np.ndarray, background: BackgroundSample) -> np.ndarray:
    """v(S) for every bitmask S: mean probability over background rows with
    the masked features replaced by the instance's values."""
    x = np.asarray(instance, dtype=np.float64)
    k = x.size
    n_masks = 1 << k
    bits = (np.arange(n_masks)[:, None] >> np.arange(k)) & 1  # (masks, k)
    values = np.empty(n_masks)
    B = background.size
    for start in range(0, n_masks, _MASK_CHUNK):
        chunk = bits[start : start + _MASK_CHUNK].astype(bool)
        composites = np.where(
            np.repeat(chunk, B, axis=0), x, np.tile(background.X, (chunk.shape[0], 1))
        )
        probs = model.predict_proba(composites)
        values[start : start + chunk.shape[0]] = probs.reshape(chunk.shape[0], B).mean(axis=1)
    return values


def exact_shapley(model, instance: np.ndarray, background: BackgroundSample,
                  instance_ref: int = -1) -> Attribution:
    """Subset-enumeration Shapley values of one prediction."""
    x = np.asarray(instance, dtype=np.float64).reshape(-1)
    k = x.size
    if k != len(background.feature_names):
        raise DimensionMismatchError(
            f"instance has {k} features, background has {len(background.feature_names)}"
        )
    if k > SHAPLEY_FEATURE_CAP:
        raise ShapleyCapError(
            f"{k} features exceeds the exact-enumeration cap of {SHAPLEY_FEATURE_CAP}"
        )
    v = coalition_values(model, x, background)
    masks = np.arange(1 << k)
    sizes = np.zeros(1 << k, dtype=np.int64)
    for j in range(k):
        sizes += (masks >> j) & 1
    # weight of adding to a coalition of size s: s!(k-1-s)!/k!
    weights = np.array(
        [math.factorial(s) * math.factorial(k - 1 - s) / math.factorial(k) for s in range(k)]
    )
    phi = np.empty(k)
    for j in range(k):
        without = masks[(masks >> j) & 1 == 0]
        gains = v[without | (1 << j)] - v[without]
        phi[j] = float(weights[sizes[without]] @ gains)
    return Attribution(
        base_value=float(v[0]),
        phi=phi,
        prediction=float(v[-1]),
        feature_names=background.feature_names,
        feature_values=x,
        instance_ref=instance_ref,
    )


@dataclass(frozen=True)
class GlobalExplanation:
    """Per-instance attributions plus the beeswarm presentation order."""

    attributions: tuple[Attribution, ...]
    feature_names: tuple[str, ...]
    feature_order: tuple[int, ...]  # indices sorted by mean |phi| descending
    normalized_values: np.ndarray  # feature values min-max scaled across instances

    @property
    def phi_matrix(self) -> np.ndarray:
        return np.stack([a.phi for a in self.attributions])

    @property
    def mean_abs_phi(self) -> np.ndarray:
        return np.abs(self.phi_matrix).mean(axis=0)


def beeswarm_data(model, instances: Dataset, background: BackgroundSample) -> GlobalExplanation:
    if len(instances) == 0:
        raise ValueError("need at least one instance to explain")
    attributions = tuple(
        exact_shapley(model, instances.X[i], background, int(instances.source_rows[i]))
        for i in range(len(instances))
    )
    phi = np.stack([a.phi for a in attributions])
    mean_abs = np.abs(phi).mean(axis=0)
    order = tuple(int(i) for i in np.lexsort((np.arange(len(mean_abs)), -mean_abs)))
    lo = instances.X.min(axis=0)
    hi = instances.X.max(axis=0)
    span = hi - lo
    with np.errstate(invalid="ignore"):
        normalized = np.where(span > 0, (instances.X - lo) / np.where(span > 0, span, 1.0), 0.5)
    return GlobalExplanation(attributions, instances.feature_names, order, normalized)


@dataclass(frozen=True)
class ForceSegment:
    feature: str
    feature_value: float
    phi: float
    start: float
    end: float


def force_plot_data(attribution: Attribution) -> tuple[ForceSegment, ...]:
    """Contributions sorted by |phi| descending, walked cumulatively from the
    base value; the last endpoint is the prediction."""
    order = np.lexsort((np.arange(len(attribution.phi)), -np.abs(attribution.phi)))
    segments = []
    position = attribution.base_value
    for j in order:
        phi = float(attribution.phi[j])
        segments.append(
            ForceSegment(
                attribution.feature_names[j],
                float(attribution.feature_values[j]),
                phi,
                position,
                position + phi,
            )
        )
        position += phi
    return tuple(segments)


# -- plain SVG rendering ------------------------------------------------------

_WIDTH = 760
_ROW_H = 44
_MARGIN_L = 230
_MARGIN_R = 30
_COLOR_LOW = (30, 136, 229)  # blue: low feature value
_COLOR_HIGH = (255, 13, 87)  # red: high feature value


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    rgb = tuple(round(a + (b - a) * t) for a, b in zip(_COLOR_LOW, _COLOR_HIGH))
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def _data_seed(*arrays: np.ndarray) -> int:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return int.from_bytes(h.digest()[:8], "little")


def _svg_document(body: list[str], width: int, height: int) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _beeswarm_svg(explanation: GlobalExplanation) -> str:
    phi = explanation.phi_matrix
    order = explanation.feature_order
    k = len(order)
    height = _ROW_H * k + 60
    span = float(np.abs(phi).max())
    span = span if span > 0 else 1.0
    x0, x1 = _MARGIN_L, _WIDTH - _MARGIN_R
    mid = (x0 + x1) / 2.0
    scale = (x1 - x0) / 2.0 / span
    rng = np.random.default_rng(_data_seed(phi))
    body = [
        f'<line x1="{_fmt(mid)}" y1="20" x2="{_fmt(mid)}" y2="{height - 40}" '
        'stroke="#999" stroke-dasharray="4 3"/>',
        f'<text x="{_fmt(mid)}" y="{height - 22}" text-anchor="middle" fill="#444">'
        "contribution to malware probability</text>",
    ]
    for row, j in enumerate(order):
        cy = 30 + row * _ROW_H + _ROW_H / 2.0
        body.append(
            f'<text class="feature-label" x="{_MARGIN_L - 12}" y="{_fmt(cy + 4)}" '
            f'text-anchor="end">{escape(explanation.feature_names[j])}</text>'
        )
        jitter = rng.uniform(-_ROW_H * 0.32, _ROW_H * 0.32, size=phi.shape[0])
        for i in range(phi.shape[0]):
            cx = mid + float(phi[i, j]) * scale
            body.append(
                f'<circle class="pt" cx="{_fmt(cx)}" cy="{_fmt(cy + jitter[i])}" r="3" '
                f'fill="{_color(float(explanation.normalized_values[i, j]))}" fill-opacity="0.75"/>'
            )
    return _svg_document(body, _WIDTH, height)


def _force_svg(attribution: Attribution) -> str:
    segments = force_plot_data(attribution)
    height = 150 + 16 * len(segments)
    xs = [attribution.base_value, attribution.prediction]
    xs += [s.start for s in segments] + [s.end for s in segments]
    lo, hi = min(xs), max(xs)
    span = (hi - lo) or 1.0
    pad = span * 0.08
    lo, hi = lo - pad, hi + pad
    x0, x1 = 40, _WIDTH - 40

    def sx(v: float) -> float:
        return x0 + (v - lo) / (hi - lo) * (x1 - x0)

    axis_y = 72.0
    body = [
        f'<line x1="{x0}" y1="{_fmt(axis_y)}" x2="{x1}" y2="{_fmt(axis_y)}" stroke="#ccc"/>',
        f'<line class="base-marker" x1="{_fmt(sx(attribution.base_value))}" y1="40" '
        f'x2="{_fmt(sx(attribution.base_value))}" y2="{_fmt(axis_y + 26)}" stroke="#555"/>',
        f'<text x="{_fmt(sx(attribution.base_value))}" y="32" text-anchor="middle" fill="#555">'
        f"base {_fmt(attribution.base_value)}</text>",
        f'<line class="prediction-marker" x1="{_fmt(sx(attribution.prediction))}" y1="40" '
        f'x2="{_fmt(sx(attribution.prediction))}" y2="{_fmt(axis_y + 26)}" stroke="#000"/>',
        f'<text x="{_fmt(sx(attribution.prediction))}" y="20" text-anchor="middle">'
        f"prediction {_fmt(attribution.prediction)}</text>",
    ]
    h = 9.0
    for i, seg in enumerate(segments):
        a, b = sx(seg.start), sx(seg.end)
        tip = 6.0 if b >= a else -6.0
        if abs(b - a) < abs(tip):
            tip = b - a
        color = "#ff0d57" if seg.phi > 0 else ("#1e88e5" if seg.phi < 0 else "#999999")
        body.append(
            f'<polygon class="arrow" fill="{color}" fill-opacity="0.85" points="'
            f"{_fmt(a)},{_fmt(axis_y - h)} {_fmt(b - tip)},{_fmt(axis_y - h)} "
            f"{_fmt(b)},{_fmt(axis_y)} {_fmt(b - tip)},{_fmt(axis_y + h)} "
            f'{_fmt(a)},{_fmt(axis_y + h)}"/>'
        )
        label_y = axis_y + 46 + 16 * i
        body.append(
            f'<text x="{x0}" y="{_fmt(label_y)}" fill="#333">{escape(seg.feature)} = '
            f"{_fmt(seg.feature_value)}: {'+' if seg.phi >= 0 else ''}{_fmt(seg.phi)}</text>"
        )
    return _svg_document(body, _WIDTH, int(height))


def render_svg(explanation, kind: str, path) -> str:
    """Write a standalone SVG; identical input produces identical bytes."""
    if kind == "beeswarm":
        if not isinstance(explanation, GlobalExplanation):
            raise TypeError("beeswarm rendering needs a GlobalExplanation")
        doc = _beeswarm_svg(explanation)
    elif kind == "force":
        if not isinstance(explanation, Attribution):
            raise TypeError("force rendering needs an Attribution")
        doc = _force_svg(explanation)
    else:
        raise ValueError(f"unknown plot kind {kind!r} (expected beeswarm or force)")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(doc)
    return doc
