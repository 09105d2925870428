"""Singular spectra of frame matrices, dense or streamed.

Two interchangeable paths produce the same spectrum: ``dense_spectrum``
decomposes the materialized matrix directly, while ``GramAccumulator`` +
``spectrum_from_gram`` stream row batches through a running M x M Gram
matrix and never hold more than one batch in memory. The streaming path is
what makes the concatenated-frame measures affordable when the frame count
is in the millions: memory stays O(M^2) for embedding dimension M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MathError
from .validation import as_frame_matrix, readonly

# Eigenvalues of an accumulated Gram matrix may round slightly negative;
# anything below -PSD_TOL_FACTOR * trace signals real corruption.
PSD_TOL_FACTOR = 1e-9


@dataclass(frozen=True)
class SingularSpectrum:
    """Nonincreasing singular values of an ``source_rows x source_cols`` matrix."""

    values: np.ndarray
    source_rows: int
    source_cols: int

    def __post_init__(self):
        v = self.values
        if v.ndim != 1 or len(v) != min(self.source_rows, self.source_cols):
            raise ValueError(
                f"spectrum must hold min(N, M) = {min(self.source_rows, self.source_cols)} values, got {len(v)}"
            )
        if np.any(v < 0) or np.any(v[1:] > v[:-1]):
            raise ValueError("singular values must be nonnegative and nonincreasing")

    def __len__(self) -> int:
        return len(self.values)


def dense_spectrum(matrix) -> SingularSpectrum:
    """Singular values of a dense matrix, largest first."""
    mat = as_frame_matrix(matrix, name="matrix")
    values = np.linalg.svd(mat, compute_uv=False)
    return SingularSpectrum(values=readonly(values), source_rows=mat.shape[0], source_cols=mat.shape[1])


class GramAccumulator:
    """Running ``C^T C`` over row batches of a conceptual tall matrix ``C``.

    Only the upper triangle is updated; the full symmetric matrix is mirrored
    from it on demand, so the accumulated Gram is exactly symmetric. All
    accumulation happens in float64 regardless of the input precision.
    Accumulators over disjoint shards can be combined with ``merge``; a single
    instance must not be updated from two threads at once.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self._upper = np.zeros((self.dim, self.dim), dtype=np.float64)
        self.rows_seen = 0

    def accumulate(self, batch) -> "GramAccumulator":
        """Add ``batch^T batch`` for a ``(rows, dim)`` batch; returns self."""
        arr = np.ascontiguousarray(batch, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"batch must be 2-dimensional, got shape {arr.shape}")
        if arr.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: batch has dim {arr.shape[1]}, accumulator has {self.dim}")
        if arr.shape[0] == 0:
            return self
        if not np.all(np.isfinite(arr)):
            raise ValueError("batch contains non-finite values")
        self._upper += np.triu(arr.T @ arr)
        self.rows_seen += arr.shape[0]
        return self

    def merge(self, other: "GramAccumulator") -> "GramAccumulator":
        """Fold another accumulator (over a disjoint shard) into this one."""
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: cannot merge dim {other.dim} into dim {self.dim}")
        self._upper += other._upper
        self.rows_seen += other.rows_seen
        return self

    @property
    def gram(self) -> np.ndarray:
        """The symmetric Gram matrix mirrored from the upper triangle."""
        return self._upper + np.triu(self._upper, 1).T


def spectrum_from_gram(acc: GramAccumulator) -> SingularSpectrum:
    """Singular values of the accumulated matrix via symmetric eigensolve.

    Eigenvalues in ``[-tol, 0)`` with ``tol = 1e-9 * trace`` are clamped to
    zero (accumulation roundoff); anything below ``-tol`` raises MathError
    because it means the accumulator was corrupted.
    """
    if acc.rows_seen < 1:
        raise ValueError("accumulator has seen no rows")
    gram = acc.gram
    eigvals = np.linalg.eigvalsh(gram)
    tol = PSD_TOL_FACTOR * float(np.trace(gram))
    if eigvals[0] < -tol:
        raise MathError(
            f"gram accumulation corrupted: eigenvalue {eigvals[0]:.6e} below -{tol:.6e}"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    values = np.sqrt(eigvals[::-1])
    n_values = min(acc.rows_seen, acc.dim)
    values = np.ascontiguousarray(values[:n_values])
    return SingularSpectrum(values=readonly(values), source_rows=acc.rows_seen, source_cols=acc.dim)
