"""Synthetic embedding sets with planted rank and cluster structure.

Frames are built as ``B z + eta``: ``B`` is a seeded ``dim x intrinsic_rank``
matrix with orthonormal columns (QR of a Gaussian draw, column signs fixed so
the first nonzero entry is positive), ``z`` is a standard normal draw in the
subspace — optionally centered on one of ``cluster_count`` seeded cluster
centers — and ``eta`` is isotropic noise of amplitude ``noise_amplitude``.

Cohorts plant a linear measure-to-score relationship across models: model i
gets intrinsic rank ``r_i`` spaced over [rank_low, rank_high] and the score
``SCORE_MAX - SCORE_SLOPE * r_i + eps`` with ``|eps| <= score_noise``, a
WER-like scale where higher rank means a lower (better) score.

All draws come from named Philox streams (see ``rng``), so any fixture can
be regenerated from its seed; generated directories include the generator
name alongside the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .correlate import DownstreamTable, ScoreRow
from .store import EmbeddingSet
from .validation import readonly

SCORE_MAX = 100.0
SCORE_SLOPE = 1.0


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic embedding set."""

    dim: int
    intrinsic_rank: int
    n_sequences: int
    frames_per_sequence: int
    noise_amplitude: float = 0.0
    cluster_count: int = 0
    cluster_separation: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.intrinsic_rank < 1:
            raise ValueError("dim and intrinsic_rank must be >= 1")
        if self.intrinsic_rank > self.dim:
            raise ValueError(f"intrinsic_rank {self.intrinsic_rank} exceeds dim {self.dim}")
        if self.n_sequences < 1 or self.frames_per_sequence < 1:
            raise ValueError("n_sequences and frames_per_sequence must be >= 1")
        if self.noise_amplitude < 0:
            raise ValueError("noise_amplitude must be >= 0")
        total = self.n_sequences * self.frames_per_sequence
        if self.cluster_count < 0 or self.cluster_count > total:
            raise ValueError(f"cluster_count must be in [0, {total}]")
        if self.cluster_count and self.cluster_separation <= 0:
            raise ValueError("cluster_separation must be > 0 when clustering")
        rng.check_seed(self.seed)

    @property
    def total_frames(self) -> int:
        return self.n_sequences * self.frames_per_sequence


def _orthonormal_basis(dim: int, rank: int, seed: int) -> np.ndarray:
    """Seeded dim x rank matrix with orthonormal, sign-fixed columns."""
    gen = rng.stream(seed, rng.SYNTH_SUBSPACE)
    q, _ = np.linalg.qr(gen.standard_normal((dim, rank)))
    for j in range(rank):
        col = q[:, j]
        nz = np.nonzero(col)[0]
        if len(nz) and col[nz[0]] < 0:
            q[:, j] = -col
    return q


def generate(spec: SynthSpec) -> EmbeddingSet:
    """Deterministically generate the embedding set described by ``spec``."""
    basis = _orthonormal_basis(spec.dim, spec.intrinsic_rank, spec.seed)
    total = spec.total_frames

    draws = rng.stream(spec.seed, rng.SYNTH_DRAWS)
    z = draws.standard_normal((total, spec.intrinsic_rank))
    if spec.cluster_count:
        centers = rng.stream(spec.seed, rng.SYNTH_CENTERS).standard_normal(
            (spec.cluster_count, spec.intrinsic_rank)
        )
        if spec.cluster_count > 1:
            # Rescale so the minimum pairwise center distance equals
            # cluster_separation (within-cluster std is 1 per component).
            diff = centers[:, None, :] - centers[None, :, :]
            dists = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            min_dist = dists[~np.eye(spec.cluster_count, dtype=bool)].min()
            if min_dist == 0.0:
                raise ValueError("seeded cluster centers coincide; use another seed")
            centers *= spec.cluster_separation / min_dist
        assignments = draws.integers(spec.cluster_count, size=total)
        z += centers[assignments]

    frames = z @ basis.T
    if spec.noise_amplitude > 0:
        noise = rng.stream(spec.seed, rng.SYNTH_NOISE).standard_normal((total, spec.dim))
        frames += spec.noise_amplitude * noise

    seqs = tuple(
        readonly(np.ascontiguousarray(frames[i * spec.frames_per_sequence : (i + 1) * spec.frames_per_sequence]))
        for i in range(spec.n_sequences)
    )
    return EmbeddingSet(dim=spec.dim, sequences=seqs, total_frames=total)


@dataclass(frozen=True)
class Cohort:
    """Synthetic stand-in for a checkpoint cohort: sets plus planted scores."""

    model_ids: tuple[str, ...]
    ranks: tuple[int, ...]
    sets: tuple[EmbeddingSet, ...]
    downstream: DownstreamTable
    specs: tuple[SynthSpec, ...] = field(repr=False, default=())


def generate_cohort(
    n_models: int,
    rank_low: int,
    rank_high: int,
    score_noise: float,
    seed: int,
    *,
    dim: int = 64,
    n_sequences: int = 100,
    frames_per_sequence: int = 200,
    noise_amplitude: float = 1e-7,
    task: str = "synthetic",
) -> Cohort:
    """Generate ``n_models`` sets with ranks spaced over [rank_low, rank_high].

    Model i's planted score is ``SCORE_MAX - SCORE_SLOPE * r_i + eps_i`` with
    ``eps_i`` uniform in [-score_noise, score_noise], so measured ranks should
    anticorrelate strongly with the scores.
    """
    if n_models < 3:
        raise ValueError(f"n_models must be >= 3, got {n_models}")
    if not 1 <= rank_low <= rank_high <= dim:
        raise ValueError(f"need 1 <= rank_low <= rank_high <= dim, got [{rank_low}, {rank_high}], dim {dim}")
    if score_noise < 0:
        raise ValueError("score_noise must be >= 0")

    ranks = np.rint(np.linspace(rank_low, rank_high, n_models)).astype(int)
    child_seeds = rng.spawn_seeds(seed, rng.COHORT_SPAWN, n_models)
    eps = rng.stream(seed, rng.SYNTH_SCORES).uniform(-score_noise, score_noise, size=n_models)

    model_ids, sets, rows, specs = [], [], [], []
    for i in range(n_models):
        model_id = f"synth-{i:03d}"
        spec = SynthSpec(
            dim=dim,
            intrinsic_rank=int(ranks[i]),
            n_sequences=n_sequences,
            frames_per_sequence=frames_per_sequence,
            noise_amplitude=noise_amplitude,
            seed=child_seeds[i],
        )
        model_ids.append(model_id)
        specs.append(spec)
        sets.append(generate(spec))
        rows.append(
            ScoreRow(
                model_id=model_id,
                task=task,
                score=float(SCORE_MAX - SCORE_SLOPE * ranks[i] + eps[i]),
                score_kind="wer",
            )
        )
    return Cohort(
        model_ids=tuple(model_ids),
        ranks=tuple(int(r) for r in ranks),
        sets=tuple(sets),
        downstream=DownstreamTable(rows=tuple(rows)),
        specs=tuple(specs),
    )
