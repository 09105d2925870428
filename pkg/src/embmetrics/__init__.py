"""Unsupervised quality measures for embedding dumps.

Computes effective-rank variants (per-sequence time-sum and global
frame-concatenation) and cluster-quality indices (WCSS inertia,
Davies-Bouldin) over on-disk embedding sets, and correlates them with
downstream score tables.
"""

from .cluster import (
    ClusterQuality,
    MiniBatchKMeans,
    cluster_quality,
    davies_bouldin_score,
    kmeans_plusplus,
    wcss_per_frame,
    wcss_score,
)
from .correlate import (
    CorrelationReport,
    DownstreamTable,
    MeasureRecord,
    ScoreRow,
    correlate,
    pearson,
)
from .errors import (
    EmbmetricsError,
    FormatError,
    InsufficientDataError,
    MathError,
    NonFiniteFrameError,
    TruncatedPayloadError,
)
from .rank import EffectiveRankResult, effective_rank, global_effective_rank, rankme_t, time_sum_matrix
from .spectral import GramAccumulator, SingularSpectrum, dense_spectrum, spectrum_from_gram
from .store import (
    EmbeddingSet,
    Manifest,
    ManifestEntry,
    SampleSpec,
    load_manifest,
    read_embeddings,
    subsample,
    write_embeddings,
    write_manifest,
)
from .synth import Cohort, SynthSpec, generate, generate_cohort

__version__ = "0.1.0"

__all__ = [
    "ClusterQuality",
    "Cohort",
    "CorrelationReport",
    "DownstreamTable",
    "EffectiveRankResult",
    "EmbeddingSet",
    "EmbmetricsError",
    "FormatError",
    "GramAccumulator",
    "InsufficientDataError",
    "Manifest",
    "ManifestEntry",
    "MathError",
    "MeasureRecord",
    "MiniBatchKMeans",
    "NonFiniteFrameError",
    "SampleSpec",
    "ScoreRow",
    "SingularSpectrum",
    "SynthSpec",
    "TruncatedPayloadError",
    "cluster_quality",
    "correlate",
    "davies_bouldin_score",
    "dense_spectrum",
    "effective_rank",
    "generate",
    "generate_cohort",
    "global_effective_rank",
    "kmeans_plusplus",
    "load_manifest",
    "pearson",
    "rankme_t",
    "read_embeddings",
    "spectrum_from_gram",
    "subsample",
    "time_sum_matrix",
    "wcss_per_frame",
    "wcss_score",
    "write_embeddings",
    "write_manifest",
    "__version__",
]
