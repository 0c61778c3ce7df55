"""Synthetic datasets for dataset-free testing.

Fixtures are Gaussian per-class clusters at a controllable separation;
subtype labels reuse the canonical taxonomy so fixture CSVs stay loadable
by the strict ingestion schema.
"""

from dataclasses import dataclass

import numpy as np

from . import catalog as cat
from .catalog import FeatureCatalog, FeatureEntry, MALMEM_CATALOG
from .dataset import Dataset
from .seeding import rng_for


@dataclass(frozen=True)
class FixtureSpec:
    n_benign: int
    n_per_subtype: int | dict[str, int] = 100
    n_subtypes: int = 1
    n_features: int = 5
    separation: float = 4.0
    n_informative: int | None = None  # default: all features carry signal
    catalog: FeatureCatalog | None = None  # overrides n_features when given
    # fraction of each subtype's mean shift that points along one shared
    # direction; high values make subtypes mutually detectable (transferable),
    # 0 gives every subtype an independent signature
    common_signal: float = 0.8

    def subtype_counts(self) -> dict[str, int]:
        if isinstance(self.n_per_subtype, dict):
            return dict(self.n_per_subtype)
        names = cat.SUBTYPE_NAMES[: self.n_subtypes]
        if self.n_subtypes > len(cat.SUBTYPE_NAMES):
            raise ValueError(f"at most {len(cat.SUBTYPE_NAMES)} synthetic subtypes")
        return {name: self.n_per_subtype for name in names}

    def resolved_catalog(self) -> FeatureCatalog:
        if self.catalog is not None:
            return self.catalog
        return FeatureCatalog(
            tuple(FeatureEntry(f"synth.f{i:02d}", "Synthetic") for i in range(self.n_features))
        )


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / norm


def malmem_profile_spec(separation: float = 4.0, n_informative: int = 10,
                        scale: float = 1.0) -> FixtureSpec:
    """Fixture shaped like the published dataset: real catalog, real counts
    (optionally scaled down), invariant features constant."""
    counts = {n: max(2, int(round(c * scale))) for n, c in cat.SUBTYPE_COUNTS.items()}
    return FixtureSpec(
        n_benign=max(2, int(round(cat.BENIGN_COUNT * scale))),
        n_per_subtype=counts,
        n_features=len(MALMEM_CATALOG),
        separation=separation,
        n_informative=n_informative,
        catalog=MALMEM_CATALOG,
    )


def make_fixture(spec: FixtureSpec, seed: int) -> Dataset:
    """Deterministic synthetic dataset; same spec and seed give byte-identical
    feature matrices."""
    counts = spec.subtype_counts()
    if spec.n_benign < 1 or any(c < 1 for c in counts.values()):
        raise ValueError("fixture counts must be positive")
    catalog = spec.resolved_catalog()
    d = len(catalog)
    n_inf = d if spec.n_informative is None else min(spec.n_informative, d)
    if n_inf < 1:
        raise ValueError("need at least one informative feature")

    if not 0.0 <= spec.common_signal <= 1.0:
        raise ValueError("common_signal must be in [0, 1]")

    rng = rng_for(seed)
    blocks = [rng.normal(0.0, 1.0, size=(spec.n_benign, d))]
    y_parts = [np.zeros(spec.n_benign, dtype=np.int8)]
    type_parts = [np.full(spec.n_benign, "", dtype="U32")]
    subtype_parts = [np.full(spec.n_benign, "", dtype="U32")]
    names = sorted(counts, key=cat.subtype_order_key)
    shared = _unit(rng.normal(0.0, 1.0, size=n_inf))
    for j, name in enumerate(names):
        own = _unit(rng.normal(0.0, 1.0, size=n_inf))
        direction = _unit(spec.common_signal * shared + (1.0 - spec.common_signal) * own)
        mean = np.zeros(d)
        mean[:n_inf] = spec.separation * direction
        n = counts[name]
        blocks.append(mean + rng.normal(0.0, 1.0, size=(n, d)))
        y_parts.append(np.ones(n, dtype=np.int8))
        mtype = cat.TYPE_OF_SUBTYPE.get(name, cat.MALWARE_TYPES[j % len(cat.MALWARE_TYPES)])
        type_parts.append(np.full(n, mtype, dtype="U32"))
        subtype_parts.append(np.full(n, name, dtype="U32"))

    X = np.vstack(blocks)
    invariant_cols = [i for i, e in enumerate(catalog.entries) if e.invariant]
    if invariant_cols:
        X[:, invariant_cols] = 0.0
    n_total = X.shape[0]
    return Dataset(
        catalog,
        X,
        np.concatenate(y_parts),
        np.concatenate(type_parts),
        np.concatenate(subtype_parts),
        np.arange(n_total, dtype=np.int64),
        provenance=f"fixture(seed={seed}, separation={spec.separation})",
    )
