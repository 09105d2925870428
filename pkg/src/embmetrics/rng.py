"""Seeded random streams on a fixed, portable bit generator.

Every random decision in the package draws from a Philox4x64-10 counter-based
generator keyed with ``(seed, purpose)``, so each purpose gets an independent
stream and outputs are reproducible from the seed plus the purpose name alone.
Purpose codes are frozen constants; changing them breaks every recorded seed.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "philox4x64-10"

# Purpose codes (arbitrary but frozen 64-bit constants).
SUBSAMPLE = 0x5355_4253
KMEANS_SEED = 0x4B50_5053
KMEANS_BATCH = 0x4B42_4154
SYNTH_SUBSPACE = 0x5359_5355
SYNTH_CENTERS = 0x5359_4345
SYNTH_DRAWS = 0x5359_4452
SYNTH_NOISE = 0x5359_4E4F
SYNTH_SCORES = 0x5359_5343
COHORT_SPAWN = 0x434F_4853


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned seed and return it as a plain int."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, purpose: int) -> np.random.Generator:
    """Return the generator for one (seed, purpose) pair."""
    key = np.array([check_seed(seed), purpose], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def spawn_seeds(seed: int, purpose: int, n: int) -> list[int]:
    """Derive ``n`` child seeds from one parent stream."""
    gen = stream(seed, purpose)
    return [int(v) for v in gen.integers(0, 2**64, size=n, dtype=np.uint64)]
