import os
from pathlib import Path

import pytest

from memshield.fixtures import FixtureSpec, make_fixture

DATA_ENV_VAR = "MEMSHIELD_DATA"

_DEFAULT_DATA_LOCATIONS = (
    "data/Obfuscated-MalMem2022.csv",
    "data/MalMem2022.csv",
    "data/malmem2022.csv",
)


def full_dataset_path() -> Path | None:
    """Path of the published dataset CSV, when one is available locally."""
    env = os.environ.get(DATA_ENV_VAR)
    if env and Path(env).exists():
        return Path(env)
    root = Path(__file__).resolve().parents[1]
    for rel in _DEFAULT_DATA_LOCATIONS:
        candidate = root / rel
        if candidate.exists():
            return candidate
    return None


requires_full_dataset = pytest.mark.skipif(
    full_dataset_path() is None,
    reason=f"published dataset CSV not found (set {DATA_ENV_VAR})",
)


@pytest.fixture(scope="session")
def binary_ds():
    """One subtype vs benign, well separated, 5 features."""
    return make_fixture(
        FixtureSpec(n_benign=300, n_per_subtype=300, n_subtypes=1,
                    n_features=5, separation=5.0),
        seed=101,
    )


@pytest.fixture(scope="session")
def multi_ds():
    """Three subtypes sharing most of their signal, 8 features."""
    return make_fixture(
        FixtureSpec(n_benign=600, n_per_subtype=120, n_subtypes=3,
                    n_features=8, separation=5.0, common_signal=0.85),
        seed=202,
    )


@pytest.fixture(scope="session")
def overlap_ds():
    """Moderately separated clusters; useful when perfect accuracy would
    mask a regression."""
    return make_fixture(
        FixtureSpec(n_benign=400, n_per_subtype=200, n_subtypes=2,
                    n_features=6, separation=1.5),
        seed=303,
    )
