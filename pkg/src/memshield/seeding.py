"""Deterministic seed derivation.

Every randomized operation takes an explicit integer seed. Sub-streams are
derived from (seed, path...) tuples so results never depend on execution
order or worker count.
"""

import numpy as np

# role codes for derived streams
ROLE_SPLIT = 0
ROLE_PARTITION = 1
ROLE_SELECTION = 2
ROLE_FINAL_FIT = 3
ROLE_BACKGROUND = 4
ROLE_SAMPLE = 5
ROLE_BASELINE = 6
ROLE_CV_FOLD = 7


def derive_seed(seed: int, *path: int) -> int:
    """Map (seed, path...) to an independent 32-bit child seed."""
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return int(ss.generate_state(1)[0])


def rng_for(seed: int, *path: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    )
