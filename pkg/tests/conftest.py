import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from embmetrics import EmbeddingSet


def random_embedding_set(gen: np.random.Generator, n_sequences=None, dim=None, max_length=12) -> EmbeddingSet:
    """A random set with varied sequence lengths for property tests."""
    if n_sequences is None:
        n_sequences = int(gen.integers(1, 9))
    if dim is None:
        dim = int(gen.integers(2, 17))
    seqs = [gen.standard_normal((int(gen.integers(1, max_length + 1)), dim)) for _ in range(n_sequences)]
    return EmbeddingSet.from_sequences(seqs)


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)
