"""Mini-batch k-means over pooled frames plus cluster-quality measures.

The estimator follows the scikit-learn API (``fit`` / ``predict`` /
``get_params``) but is written from scratch so the whole fit is a pure
function of ``(frames, params)``: seeded k-means++ initialization, seeded
batch draws without replacement, nearest-centroid ties broken toward the
lowest index, and Sculley-style per-center count-based updates applied in
frame order. Two runs with the same inputs produce bit-identical models.

Quality measures are plain functions in the style of ``sklearn.metrics``.
``wcss_score`` is the within-cluster sum of squared distances (a sum, not a
mean; see ``wcss_per_frame`` for the normalized variant — never substituted
silently). ``davies_bouldin_score`` uses the classical dispersion, the mean
Euclidean distance of a cluster's members to its centroid. Both recompute
assignments as nearest-centroid over whatever frames they are given, so
evaluation frames need not be the training frames.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from . import rng
from .errors import InsufficientDataError, MathError
from .validation import as_frame_matrix, check_same_dim


@dataclass(frozen=True)
class ClusterQuality:
    """WCSS inertia, Davies-Bouldin index, and the populated-cluster count."""

    wcss: float
    db_index: float
    populated_clusters: int


def _squared_distances(frames: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """All pairwise squared Euclidean distances, (n_frames, n_centers)."""
    f_sq = np.einsum("ij,ij->i", frames, frames)
    c_sq = np.einsum("ij,ij->i", centers, centers)
    d2 = f_sq[:, None] + c_sq[None, :] - 2.0 * (frames @ centers.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def assign_nearest(frames: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-centroid labels; ties go to the lowest centroid index."""
    return np.argmin(_squared_distances(frames, centers), axis=1)


def kmeans_plusplus(frames, k: int, seed: int, *, allow_k_reduction: bool = False) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws from the input frames.

    The first center is uniform over the frames; each later center is drawn
    with probability proportional to its squared distance to the nearest
    center already chosen. All centers are rows of the input. If the frames
    contain fewer than k distinct points, k is reduced to that count when
    ``allow_k_reduction`` is set and rejected otherwise.
    """
    frames = as_frame_matrix(frames)
    n = frames.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        if not allow_k_reduction:
            raise InsufficientDataError(f"insufficient frames for k: {n} frames < k={k}")
        warnings.warn(f"k reduced from {k} to {n} (fewer frames than k)", stacklevel=2)
        k = n
    gen = rng.stream(seed, rng.KMEANS_SEED)

    centers = np.empty((k, frames.shape[1]), dtype=np.float64)
    first = int(gen.integers(n))
    centers[0] = frames[first]
    d2 = np.einsum("ij,ij->i", frames - centers[0], frames - centers[0])

    chosen = 1
    while chosen < k:
        mass = float(d2.sum())
        if mass <= 0.0:
            # Every frame coincides with a chosen center: fewer distinct
            # frames than k.
            if not allow_k_reduction:
                raise InsufficientDataError(
                    f"insufficient distinct frames for k: {chosen} distinct < k={k}"
                )
            break
        cum = np.cumsum(d2)
        r = gen.random() * mass
        idx = int(np.searchsorted(cum, r, side="right"))
        if idx >= n:  # r rounded up to the total mass
            idx = int(np.flatnonzero(d2)[-1])
        centers[chosen] = frames[idx]
        diff = frames - centers[chosen]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
        chosen += 1

    if chosen < k:
        warnings.warn(f"k reduced from {k} to {chosen} (distinct frames exhausted)", stacklevel=2)
        centers = centers[:chosen]
    return centers


class MiniBatchKMeans(ClusterMixin, BaseEstimator):
    """Mini-batch k-means with k-means++ seeding and deterministic updates.

    Parameters
    ----------
    n_clusters : int, default=1024
        Number of centroids k.
    batch_frames : int, default=10240
        Frames per mini-batch; batches are drawn without replacement, so a
        value >= the frame count makes every iteration a full batch.
    max_iterations : int, default=300
        Upper bound on mini-batch iterations.
    center_move_tol : float, default=1e-4
        Convergence threshold, relative to the RMS norm of the centroids:
        the fit stops once the largest centroid displacement over one batch
        is at most ``center_move_tol * rms``.
    seed : int, default=0
        64-bit seed; drives both the k-means++ draws and the batch draws.
    allow_k_reduction : bool, default=False
        Permit fitting with fewer centroids than requested when the data
        has fewer frames (or fewer distinct frames) than ``n_clusters``.

    Attributes
    ----------
    cluster_centers_ : ndarray of shape (k_effective, dim)
    counts_ : ndarray of shape (k_effective,)
        Per-center assignment counts consumed during fitting.
    labels_ : ndarray
        Nearest-centroid labels of the training frames.
    inertia_ : float
        WCSS of the training frames under the final centroids.
    converged_ : bool
    n_iter_ : int
    """

    def __init__(
        self,
        n_clusters: int = 1024,
        batch_frames: int = 10240,
        max_iterations: int = 300,
        center_move_tol: float = 1e-4,
        seed: int = 0,
        allow_k_reduction: bool = False,
    ):
        self.n_clusters = n_clusters
        self.batch_frames = batch_frames
        self.max_iterations = max_iterations
        self.center_move_tol = center_move_tol
        self.seed = seed
        self.allow_k_reduction = allow_k_reduction

    def _check_params(self):
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {self.n_clusters}")
        if self.batch_frames < 1:
            raise ValueError(f"batch_frames must be >= 1, got {self.batch_frames}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.center_move_tol < 0:
            raise ValueError(f"center_move_tol must be >= 0, got {self.center_move_tol}")

    def fit(self, X, y=None):
        """Fit centroids on pooled frames (an array or an EmbeddingSet)."""
        self._check_params()
        if hasattr(X, "frames") and callable(X.frames):
            X = X.frames()
        frames = as_frame_matrix(X)
        n = frames.shape[0]

        centers = kmeans_plusplus(
            frames, self.n_clusters, self.seed, allow_k_reduction=self.allow_k_reduction
        )
        k = centers.shape[0]
        counts = np.zeros(k, dtype=np.int64)
        gen = rng.stream(self.seed, rng.KMEANS_BATCH)
        batch_size = min(self.batch_frames, n)

        converged = False
        n_iter = 0
        for _ in range(self.max_iterations):
            n_iter += 1
            idx = gen.permutation(n)[:batch_size]
            batch = frames[idx]
            labels = assign_nearest(batch, centers)
            before = centers.copy()
            for row, label in zip(batch, labels):
                counts[label] += 1
                centers[label] += (row - centers[label]) / counts[label]
            displacement = np.sqrt(np.max(np.einsum("ij,ij->i", centers - before, centers - before)))
            rms = np.sqrt(np.mean(np.einsum("ij,ij->i", centers, centers)))
            if displacement <= self.center_move_tol * rms:
                converged = True
                break

        self.cluster_centers_ = centers
        self.counts_ = counts
        self.converged_ = converged
        self.n_iter_ = n_iter
        self.labels_ = assign_nearest(frames, centers)
        self.inertia_ = float(
            np.sum((frames - centers[self.labels_]) ** 2)
        )
        return self

    def predict(self, X):
        """Nearest-centroid labels for new frames."""
        if not hasattr(self, "cluster_centers_"):
            raise ValueError("estimator is not fitted; call fit first")
        frames = as_frame_matrix(X)
        check_same_dim(frames, self.cluster_centers_)
        return assign_nearest(frames, self.cluster_centers_)


def wcss_score(frames, centroids) -> float:
    """Within-cluster sum of squared distances to the nearest centroid.

    Assignments are recomputed as nearest-centroid over the given frames,
    so any frames can be scored against any centroids of matching dim.
    """
    frames = as_frame_matrix(frames)
    centroids = as_frame_matrix(centroids, name="centroids")
    check_same_dim(frames, centroids)
    labels = assign_nearest(frames, centroids)
    return float(np.sum((frames - centroids[labels]) ** 2))


def wcss_per_frame(frames, centroids) -> float:
    """WCSS divided by the frame count (the 'average' reading of inertia)."""
    frames = as_frame_matrix(frames)
    return wcss_score(frames, centroids) / frames.shape[0]


def davies_bouldin_score(frames, centroids) -> float:
    """Davies-Bouldin index over the populated clusters.

    Dispersion ``s_i`` is the mean Euclidean distance of cluster i's members
    to its centroid; ``d_ij`` is the distance between centroids. The index
    averages ``max_j (s_i + s_j) / d_ij`` over populated clusters only;
    empty clusters are excluded from both the average and the max. Lower is
    tighter and better separated.
    """
    frames = as_frame_matrix(frames)
    centroids = as_frame_matrix(centroids, name="centroids")
    check_same_dim(frames, centroids)
    labels = assign_nearest(frames, centroids)
    return _db_from_assignments(frames, centroids, labels)


def _db_from_assignments(frames: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    populated = np.unique(labels)
    if len(populated) < 2:
        raise InsufficientDataError(
            f"Davies-Bouldin needs at least 2 populated clusters, got {len(populated)}"
        )
    dispersions = np.array(
        [
            float(np.mean(np.linalg.norm(frames[labels == c] - centroids[c], axis=1)))
            for c in populated
        ]
    )
    centers = centroids[populated]
    diff = centers[:, None, :] - centers[None, :, :]
    dists = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    off_diag = ~np.eye(len(populated), dtype=bool)
    if np.any(dists[off_diag] == 0.0):
        raise MathError("degenerate centroids: two populated centroids coincide")
    ratios = (dispersions[:, None] + dispersions[None, :]) / np.where(off_diag, dists, np.inf)
    return float(np.mean(np.max(ratios, axis=1)))


def cluster_quality(frames, centroids) -> ClusterQuality:
    """WCSS, Davies-Bouldin, and populated-cluster count in one pass."""
    frames = as_frame_matrix(frames)
    centroids = as_frame_matrix(centroids, name="centroids")
    check_same_dim(frames, centroids)
    labels = assign_nearest(frames, centroids)
    wcss = float(np.sum((frames - centroids[labels]) ** 2))
    populated = int(len(np.unique(labels)))
    db = _db_from_assignments(frames, centroids, labels)
    return ClusterQuality(wcss=wcss, db_index=db, populated_clusters=populated)
