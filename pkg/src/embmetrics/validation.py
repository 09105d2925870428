"""Input validation helpers used by the estimators and measure functions."""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteFrameError


def as_frame_matrix(x, *, name: str = "frames") -> np.ndarray:
    """Coerce ``x`` to a 2-D float64 C-contiguous array of finite values.

    Raises NonFiniteFrameError on NaN/Inf and ValueError on bad shape.
    """
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteFrameError(f"{name} contain non-finite values")
    return arr


def check_same_dim(a: np.ndarray, b: np.ndarray, *, names: tuple[str, str] = ("frames", "centroids")) -> None:
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"dimension mismatch: {names[0]} have dim {a.shape[1]}, {names[1]} have dim {b.shape[1]}"
        )


def readonly(arr: np.ndarray) -> np.ndarray:
    """Mark an array immutable (shared-safety for frozen containers)."""
    arr.flags.writeable = False
    return arr
