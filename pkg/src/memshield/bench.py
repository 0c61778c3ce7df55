"""Prediction latency and serialized-size measurement.

Latency uses batch timing by default: single predictions at the
microsecond scale are dominated by timer noise, so we time batches and
divide by the batch size. Warmup predictions are never counted.
"""

import platform
import time
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BenchConfig:
    warmup: int = 1_000
    reps: int = 100_000
    batch_size: int | None = None  # default: whole instance set per batch


@dataclass(frozen=True)
class LatencyReport:
    n_predictions: int
    mean_us: float
    median_us: float
    p99_us: float
    warmup_count: int
    batch_size: int
    n_batches: int
    timer_resolution_s: float
    low_resolution_mode: bool
    hardware: str
    prediction_checksum: float  # consumed sum of probabilities; keeps the timed calls live


@dataclass(frozen=True)
class ThroughputReport:
    predictions_per_second: float
    threads: int
    n_predictions: int


@dataclass(frozen=True)
class SizeReport:
    serialized_bytes: int
    node_count: int
    tree_count: int


def _hardware_descriptor() -> str:
    cpu = platform.processor() or platform.machine() or "unknown CPU"
    return f"{platform.platform()}; {cpu}; Python {platform.python_version()}"


def _batches(X: np.ndarray, total: int, batch_size: int):
    """Cycle the instance set until `total` predictions are covered."""
    n = X.shape[0]
    offset = 0
    remaining = total
    while remaining > 0:
        size = min(batch_size, remaining)
        rows = (offset + np.arange(size)) % n
        yield X[rows]
        offset = (offset + size) % n
        remaining -= size


def measure_latency(model, instances: np.ndarray, config: BenchConfig = BenchConfig()) -> LatencyReport:
    X = np.asarray(instances, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("need at least one instance to benchmark")
    if config.reps < 1:
        raise ValueError("reps must be >= 1")
    batch_size = config.batch_size or min(X.shape[0], config.reps)
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")

    for batch in _batches(X, config.warmup, batch_size):
        model.predict_proba(batch)

    checksum = 0.0
    per_batch_us = []
    total_time = 0.0
    n_timed = 0
    for batch in _batches(X, config.reps, batch_size):
        t0 = time.perf_counter()
        probs = model.predict_proba(batch)
        dt = time.perf_counter() - t0
        checksum += float(probs.sum())
        per_batch_us.append(dt / len(batch) * 1e6)
        total_time += dt
        n_timed += len(batch)

    resolution = float(time.get_clock_info("perf_counter").resolution)
    return LatencyReport(
        n_predictions=n_timed,
        mean_us=total_time / n_timed * 1e6,
        median_us=float(np.percentile(per_batch_us, 50)),
        p99_us=float(np.percentile(per_batch_us, 99)),
        warmup_count=config.warmup,
        batch_size=batch_size,
        n_batches=len(per_batch_us),
        timer_resolution_s=resolution,
        low_resolution_mode=resolution > 1e-6,
        hardware=_hardware_descriptor(),
        prediction_checksum=checksum,
    )


def measure_throughput(model, instances: np.ndarray, threads: int = 4,
                       reps: int = 100_000) -> ThroughputReport:
    """Parallel-throughput mode; reported separately from latency because
    concurrent batches overlap and per-instance time loses meaning."""
    from concurrent.futures import ThreadPoolExecutor

    X = np.asarray(instances, dtype=np.float64)
    batches = list(_batches(X, reps, max(1, reps // max(threads * 8, 1))))
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for _ in pool.map(model.predict_proba, batches):
            pass
    dt = time.perf_counter() - t0
    return ThroughputReport(reps / dt, threads, reps)


def measure_size(model) -> SizeReport:
    from .serialize import serialize

    data = serialize(model)
    trees = getattr(model, "trees", None)
    if trees is not None:
        node_count = sum(t.node_count for t in trees)
        tree_count = len(trees)
    elif getattr(model, "tree", None) is not None:
        node_count = model.tree.node_count
        tree_count = 1
    else:
        node_count = 0
        tree_count = 0
    return SizeReport(len(data), node_count, tree_count)
