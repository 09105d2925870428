"""On-disk embedding format (EMBD), manifests, and seeded subsampling.

EMBD layout (all little-endian):

    bytes 0-3    magic ``EMBD``
    bytes 4-5    format version, u16 (currently 1)
    bytes 6-7    reserved, must be zero
    bytes 8-11   embedding dimensionality d, u32
    bytes 12-19  sequence count n, u64
    bytes 20-27  total frame count, u64
    bytes 28-31  reserved, must be zero
    then         n sequence lengths, u64 each
    then         total_frames x d float64 values, sequence-major, row-major

Frames are stored as IEEE-754 binary64 so rank measures never see a second
rounding regime from storage.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Literal, Sequence

import numpy as np

from . import rng
from .errors import FormatError, NonFiniteFrameError, TruncatedPayloadError
from .validation import readonly

MAGIC = b"EMBD"
VERSION = 1
_HEADER = struct.Struct("<4sHHIQQI")  # 32 bytes


@dataclass(frozen=True)
class EmbeddingSet:
    """An immutable collection of variable-length frame-embedding sequences.

    ``sequences[i]`` is a read-only float64 array of shape ``(T_i, dim)``;
    row ``t`` is the embedding of frame ``t`` of utterance ``i``.
    """

    dim: int
    sequences: tuple[np.ndarray, ...]
    total_frames: int

    @classmethod
    def from_sequences(cls, sequences: Iterable[np.ndarray]) -> "EmbeddingSet":
        """Validate and freeze a list of ``(T_i, dim)`` arrays."""
        seqs = []
        dim = None
        for i, raw in enumerate(sequences):
            arr = np.ascontiguousarray(raw, dtype=np.float64)
            if arr.ndim == 1:
                arr = arr.reshape(1, -1)
            if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
                raise ValueError(f"sequence {i} must be a non-empty 2-D array, got shape {arr.shape}")
            if dim is None:
                dim = arr.shape[1]
            elif arr.shape[1] != dim:
                raise ValueError(f"sequence {i} has dim {arr.shape[1]}, expected {dim}")
            if not np.all(np.isfinite(arr)):
                raise NonFiniteFrameError(f"sequence {i} contains non-finite frame values")
            seqs.append(readonly(arr))
        if not seqs:
            raise ValueError("empty embedding set")
        total = sum(s.shape[0] for s in seqs)
        return cls(dim=dim, sequences=tuple(seqs), total_frames=total)

    def validate(self) -> None:
        """Re-check all invariants (for sets built without the factory)."""
        if not self.sequences:
            raise ValueError("empty embedding set")
        total = 0
        for i, s in enumerate(self.sequences):
            if s.ndim != 2 or s.shape[0] < 1:
                raise ValueError(f"sequence {i} has invalid shape {s.shape}")
            if s.shape[1] != self.dim:
                raise ValueError(f"sequence {i} has dim {s.shape[1]}, expected {self.dim}")
            if not np.all(np.isfinite(s)):
                raise NonFiniteFrameError(f"sequence {i} contains non-finite frame values")
            total += s.shape[0]
        if total != self.total_frames:
            raise ValueError(f"total_frames is {self.total_frames}, sequences sum to {total}")

    @property
    def n_sequences(self) -> int:
        return len(self.sequences)

    def lengths(self) -> np.ndarray:
        return np.array([s.shape[0] for s in self.sequences], dtype=np.int64)

    def frames(self) -> np.ndarray:
        """All frames pooled into one ``(total_frames, dim)`` array."""
        return np.concatenate(self.sequences, axis=0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.total_frames == other.total_frames
            and len(self.sequences) == len(other.sequences)
            and all(np.array_equal(a, b) for a, b in zip(self.sequences, other.sequences))
        )


def write_embeddings(emb: EmbeddingSet, destination: str | Path) -> None:
    """Serialize an EmbeddingSet to the EMBD binary format.

    Writing then reading reproduces the set bit-exactly.
    """
    emb.validate()
    lengths = emb.lengths()
    header = _HEADER.pack(MAGIC, VERSION, 0, emb.dim, emb.n_sequences, emb.total_frames, 0)
    with open(destination, "wb") as fh:
        fh.write(header)
        fh.write(lengths.astype("<u8").tobytes())
        for seq in emb.sequences:
            fh.write(np.ascontiguousarray(seq, dtype="<f8").tobytes())


def read_embeddings(source: str | Path) -> EmbeddingSet:
    """Load and validate an EMBD file.

    Raises FormatError (bad magic/version/header), TruncatedPayloadError
    (declared sizes exceed the file) or NonFiniteFrameError (NaN payload).
    """
    data = Path(source).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"{source}: truncated payload (file shorter than header)")
    magic, version, res0, dim, n_seq, total, res1 = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: unrecognized format (bad magic {magic!r})")
    if version != VERSION:
        raise FormatError(f"{source}: unrecognized format (unsupported version {version})")
    if res0 != 0 or res1 != 0:
        raise FormatError(f"{source}: unrecognized format (reserved header bytes not zero)")
    if dim < 1 or n_seq < 1:
        raise FormatError(f"{source}: unrecognized format (dim={dim}, sequences={n_seq})")

    lengths_end = _HEADER.size + 8 * n_seq
    if len(data) < lengths_end:
        raise TruncatedPayloadError(f"{source}: truncated payload (length table incomplete)")
    lengths = np.frombuffer(data, dtype="<u8", count=n_seq, offset=_HEADER.size)
    if np.any(lengths < 1):
        raise FormatError(f"{source}: unrecognized format (zero-length sequence)")
    if int(lengths.sum()) != total:
        raise FormatError(
            f"{source}: unrecognized format (declared {total} frames, lengths sum to {int(lengths.sum())})"
        )

    payload_bytes = total * dim * 8
    if len(data) - lengths_end < payload_bytes:
        raise TruncatedPayloadError(
            f"{source}: truncated payload (need {payload_bytes} frame bytes, have {len(data) - lengths_end})"
        )
    if len(data) - lengths_end > payload_bytes:
        raise FormatError(f"{source}: unrecognized format (trailing data after payload)")

    flat = np.frombuffer(data, dtype="<f8", count=total * dim, offset=lengths_end)
    frames = flat.reshape(total, dim).astype(np.float64, copy=True)

    sequences = []
    offset = 0
    for i, length in enumerate(lengths):
        seq = frames[offset : offset + int(length)]
        if not np.all(np.isfinite(seq)):
            raise NonFiniteFrameError(f"{source}: sequence {i} contains non-finite frame values")
        sequences.append(readonly(seq))
        offset += int(length)
    return EmbeddingSet(dim=int(dim), sequences=tuple(sequences), total_frames=int(total))


@dataclass(frozen=True)
class SampleSpec:
    """Seeded frame-budget subsampling policy.

    ``max_frames=None`` means unlimited (identity). ``unit="sequences"``
    keeps whole utterances (what the per-sequence rank measure needs);
    ``unit="frames"`` pools frames and draws them individually, which only
    makes sense for sequence-agnostic measures. Budgets are in frames; as a
    rough conversion, 1 hour of audio at 50 frames/s is about 180,000 frames.
    """

    max_frames: int | None = None
    seed: int = 0
    unit: Literal["frames", "sequences"] = "sequences"

    def __post_init__(self):
        if self.max_frames is not None and self.max_frames < 1:
            raise ValueError("max_frames must be >= 1 when bounded")
        if self.unit not in ("frames", "sequences"):
            raise ValueError(f"unit must be 'frames' or 'sequences', got {self.unit!r}")
        rng.check_seed(self.seed)


def subsample(emb: EmbeddingSet, spec: SampleSpec) -> EmbeddingSet:
    """Deterministically reduce a set to at most ``spec.max_frames`` frames.

    Sequence unit: sequences are visited in a seeded shuffled order and kept
    while they fit the remaining budget; the walk stops at the first sequence
    that does not fit. At least one sequence is always kept. Kept sequences
    stay in their original order.

    Frame unit: frames are drawn uniformly without replacement across the
    pooled frames and returned as length-1 sequences in pooled order.
    """
    if spec.max_frames is None:
        return emb
    gen = rng.stream(spec.seed, rng.SUBSAMPLE)

    if spec.unit == "sequences":
        order = gen.permutation(emb.n_sequences)
        kept: list[int] = []
        budget = spec.max_frames
        for idx in order:
            length = emb.sequences[idx].shape[0]
            if length <= budget:
                kept.append(int(idx))
                budget -= length
            else:
                break
        if not kept:
            kept = [int(order[0])]
        kept.sort()
        seqs = tuple(emb.sequences[i] for i in kept)
        return EmbeddingSet(dim=emb.dim, sequences=seqs, total_frames=sum(s.shape[0] for s in seqs))

    pooled = emb.frames()
    n = min(spec.max_frames, emb.total_frames)
    chosen = np.sort(gen.choice(emb.total_frames, size=n, replace=False))
    selected = readonly(pooled[chosen])
    seqs = tuple(selected[i : i + 1] for i in range(n))
    return EmbeddingSet(dim=emb.dim, sequences=seqs, total_frames=n)


@dataclass(frozen=True)
class ManifestEntry:
    model_id: str
    checkpoint_step: int
    layer: int
    path: Path
    dataset_tag: str = ""

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.model_id, self.checkpoint_step, self.layer)


@dataclass(frozen=True)
class Manifest:
    """An ordered list of embedding dumps, one per (model, step, layer)."""

    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)


_MANIFEST_KEYS = {"model_id", "checkpoint_step", "layer", "path", "dataset_tag"}


def load_manifest(path: str | Path, *, check_paths: bool = True) -> Manifest:
    """Load a manifest JSON array, resolving relative paths against its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: manifest is not valid JSON ({exc})") from exc
    if not isinstance(raw, list):
        raise FormatError(f"{path}: manifest must be a JSON array")

    entries = []
    seen: set[tuple[str, int, int]] = set()
    for i, obj in enumerate(raw):
        if not isinstance(obj, dict) or not _MANIFEST_KEYS.issubset(obj):
            missing = _MANIFEST_KEYS - set(obj) if isinstance(obj, dict) else _MANIFEST_KEYS
            raise FormatError(f"{path}: entry {i} missing keys {sorted(missing)}")
        entry = ManifestEntry(
            model_id=str(obj["model_id"]),
            checkpoint_step=int(obj["checkpoint_step"]),
            layer=int(obj["layer"]),
            path=(path.parent / obj["path"]) if not Path(obj["path"]).is_absolute() else Path(obj["path"]),
            dataset_tag=str(obj["dataset_tag"]),
        )
        if entry.key in seen:
            raise FormatError(f"{path}: duplicate (model_id, checkpoint_step, layer) {entry.key}")
        seen.add(entry.key)
        if check_paths and not entry.path.is_file():
            raise FormatError(f"{path}: entry {i} path does not resolve to a readable file: {entry.path}")
        entries.append(entry)
    return Manifest(entries=tuple(entries))


def write_manifest(entries: Sequence[ManifestEntry], path: str | Path, *, relative_to: Path | None = None) -> None:
    path = Path(path)
    objs = []
    for e in entries:
        p = e.path
        if relative_to is not None:
            try:
                p = p.relative_to(relative_to)
            except ValueError:
                pass
        objs.append(
            {
                "model_id": e.model_id,
                "checkpoint_step": e.checkpoint_step,
                "layer": e.layer,
                "path": str(p),
                "dataset_tag": e.dataset_tag,
            }
        )
    path.write_text(json.dumps(objs, indent=2) + "\n")
