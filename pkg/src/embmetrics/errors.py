"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: file/format problems exit 1, numeric
degeneracies exit 2, violated preconditions exit 3.
"""


class EmbmetricsError(Exception):
    """Base class for all package-specific errors."""


class FormatError(EmbmetricsError):
    """Embedding file or manifest does not match the expected layout."""


class TruncatedPayloadError(FormatError):
    """Embedding file declares more data than the file actually holds."""


class NonFiniteFrameError(EmbmetricsError):
    """A frame (or derived vector) contains NaN or infinity."""


class MathError(EmbmetricsError):
    """A measure is undefined for the given input (zero matrix,
    coincident centroids, corrupted accumulation)."""


class InsufficientDataError(EmbmetricsError):
    """Not enough data to satisfy an operation's precondition
    (frames < k, fewer than 3 matched models, ...)."""
