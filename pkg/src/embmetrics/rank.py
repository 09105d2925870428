"""Effective-rank measures over embedding sets.

The effective rank of a matrix is ``exp(H)`` where ``H`` is the Shannon
entropy of its singular values normalized to sum to one. It is a
real-valued, threshold-free stand-in for the matrix rank: 1 for a rank-one
matrix, ``min(N, M)`` for a perfectly isotropic one.

Two aggregations are provided for a set of frame sequences:

* ``rankme_t`` sums each sequence over time (one vector per utterance) and
  takes the effective rank of the stacked sums, so it measures dispersion
  at the utterance level.
* ``global_effective_rank`` pools every frame of every sequence and takes
  the effective rank of the full concatenation, streamed through a Gram
  accumulator so the concatenation is never materialized.

Conventions, fixed here and documented because other definitions exist in
the wild: singular values are normalized by their L1 mass (sigma / sum sigma,
not sigma^2), the entropy is in nats, zero singular values contribute
exactly zero to the entropy, and no small-sigma thresholding is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MathError, NonFiniteFrameError
from .spectral import GramAccumulator, SingularSpectrum, dense_spectrum, spectrum_from_gram
from .store import EmbeddingSet


@dataclass(frozen=True)
class EffectiveRankResult:
    """Effective rank plus the quantities it was derived from."""

    value: float
    entropy_nats: float
    spectrum_length: int
    sigma_mass: float


def effective_rank(spectrum: SingularSpectrum | np.ndarray) -> EffectiveRankResult:
    """Effective rank of a singular spectrum.

    Accepts a SingularSpectrum or a bare 1-D array of nonnegative singular
    values. Raises MathError for an all-zero spectrum (the zero matrix has
    no defined effective rank).
    """
    if isinstance(spectrum, SingularSpectrum):
        values = spectrum.values
    else:
        values = np.asarray(spectrum, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"spectrum must be 1-dimensional, got shape {values.shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("singular values must be finite and nonnegative")

    mass = float(values.sum())
    if mass <= 0.0:
        raise MathError("zero matrix has undefined effective rank")
    positive = values[values > 0]
    p = positive / mass
    entropy = float(-np.sum(p * np.log(p)))
    entropy = max(entropy, 0.0)
    # exp can overshoot the count of positive values by one ulp; the true
    # value never does, so clamp into the mathematically valid range.
    value = min(max(math.exp(entropy), 1.0), float(len(positive)))
    return EffectiveRankResult(
        value=value,
        entropy_nats=entropy,
        spectrum_length=len(values),
        sigma_mass=mass,
    )


def time_sum_matrix(emb: EmbeddingSet) -> np.ndarray:
    """Per-sequence sums over time, stacked into an ``(n_sequences, dim)`` matrix."""
    sums = np.empty((emb.n_sequences, emb.dim), dtype=np.float64)
    with np.errstate(over="ignore"):  # overflow is detected and reported below
        for i, seq in enumerate(emb.sequences):
            sums[i] = seq.sum(axis=0)
            if not np.all(np.isfinite(sums[i])):
                raise NonFiniteFrameError(f"sequence {i} time-sum is non-finite")
    return sums


def rankme_t(emb: EmbeddingSet) -> EffectiveRankResult:
    """Effective rank of the per-sequence time-sum matrix.

    Each sequence is summed (not averaged) along time; the n resulting
    vectors are stacked and decomposed densely, which is cheap because the
    matrix is only n_sequences x dim.
    """
    return effective_rank(dense_spectrum(time_sum_matrix(emb)))


def global_effective_rank(emb: EmbeddingSet) -> EffectiveRankResult:
    """Effective rank of all frames pooled across sequences.

    Frames stream through a Gram accumulator, so only the dim x dim Gram is
    held; the result depends on the pooled frames only, not on how they are
    split into sequences.
    """
    acc = GramAccumulator(emb.dim)
    for seq in emb.sequences:
        acc.accumulate(seq)
    return effective_rank(spectrum_from_gram(acc))
