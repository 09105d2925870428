"""Embedding file format, manifests, and seeded subsampling."""

import json
import struct

import numpy as np
import pytest

from embmetrics import (
    EmbeddingSet,
    FormatError,
    NonFiniteFrameError,
    SampleSpec,
    TruncatedPayloadError,
    load_manifest,
    read_embeddings,
    subsample,
    write_embeddings,
    write_manifest,
)
from embmetrics.store import ManifestEntry

from conftest import random_embedding_set


def write_fixture(tmp_path, gen, lengths=(3, 5), dim=4):
    emb = EmbeddingSet.from_sequences([gen.standard_normal((t, dim)) for t in lengths])
    path = tmp_path / "fixture.embd"
    write_embeddings(emb, path)
    return emb, path


class TestEmbeddingSet:
    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty embedding set"):
            EmbeddingSet.from_sequences([])

    def test_mixed_dims_rejected(self, gen):
        with pytest.raises(ValueError, match="dim"):
            EmbeddingSet.from_sequences([gen.standard_normal((2, 3)), gen.standard_normal((2, 4))])

    def test_non_finite_rejected(self):
        bad = np.array([[1.0, np.nan]])
        with pytest.raises(NonFiniteFrameError, match="sequence 0"):
            EmbeddingSet.from_sequences([bad])

    def test_totals_and_pooling(self, gen):
        emb = random_embedding_set(gen)
        assert emb.total_frames == sum(s.shape[0] for s in emb.sequences)
        assert emb.frames().shape == (emb.total_frames, emb.dim)

    def test_sequences_immutable(self, gen):
        emb = random_embedding_set(gen)
        with pytest.raises(ValueError):
            emb.sequences[0][0, 0] = 1.0


class TestFormat:
    def test_file_size_matches_layout(self, tmp_path, gen):
        # header 32 + two u64 lengths + 8 frames x 4 dims x 8 bytes
        _, path = write_fixture(tmp_path, gen, lengths=(3, 5), dim=4)
        assert path.stat().st_size == 32 + 2 * 8 + 8 * 4 * 8

    def test_round_trip_bit_exact(self, tmp_path, gen):
        for _ in range(5):
            emb = random_embedding_set(gen)
            path = tmp_path / "rt.embd"
            write_embeddings(emb, path)
            got = read_embeddings(path)
            assert got == emb
            assert got.dim == emb.dim and got.total_frames == emb.total_frames

    def test_bad_magic(self, tmp_path, gen):
        _, path = write_fixture(tmp_path, gen)
        data = bytearray(path.read_bytes())
        data[0:4] = b"NOPE"
        path.write_bytes(data)
        with pytest.raises(FormatError, match="unrecognized format"):
            read_embeddings(path)

    def test_bad_version(self, tmp_path, gen):
        _, path = write_fixture(tmp_path, gen)
        data = bytearray(path.read_bytes())
        data[4:6] = struct.pack("<H", 9)
        path.write_bytes(data)
        with pytest.raises(FormatError, match="version"):
            read_embeddings(path)

    def test_truncated_payload(self, tmp_path, gen):
        _, path = write_fixture(tmp_path, gen)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(TruncatedPayloadError, match="truncated payload"):
            read_embeddings(path)

    def test_truncated_header(self, tmp_path, gen):
        _, path = write_fixture(tmp_path, gen)
        path.write_bytes(path.read_bytes()[:20])
        with pytest.raises(TruncatedPayloadError):
            read_embeddings(path)

    def test_nan_payload(self, tmp_path, gen):
        _, path = write_fixture(tmp_path, gen, lengths=(2, 2), dim=3)
        data = bytearray(path.read_bytes())
        payload_start = 32 + 2 * 8
        data[payload_start : payload_start + 8] = struct.pack("<d", float("nan"))
        path.write_bytes(data)
        with pytest.raises(NonFiniteFrameError, match="sequence 0"):
            read_embeddings(path)

    def test_trailing_garbage(self, tmp_path, gen):
        _, path = write_fixture(tmp_path, gen)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(FormatError, match="trailing"):
            read_embeddings(path)

    def test_header_frame_count_mismatch(self, tmp_path, gen):
        _, path = write_fixture(tmp_path, gen, lengths=(3, 5), dim=4)
        data = bytearray(path.read_bytes())
        data[20:28] = struct.pack("<Q", 9)  # lengths still sum to 8
        path.write_bytes(data)
        with pytest.raises(FormatError, match="lengths sum"):
            read_embeddings(path)


class TestSubsample:
    def test_unlimited_is_identity(self, gen):
        emb = random_embedding_set(gen)
        assert subsample(emb, SampleSpec(max_frames=None, seed=1)) is emb

    def test_frame_unit_cardinality_and_subset(self, gen):
        emb = EmbeddingSet.from_sequences([gen.standard_normal((1, 6)) for _ in range(10)])
        out = subsample(emb, SampleSpec(max_frames=3, seed=7, unit="frames"))
        assert out.total_frames == 3
        assert all(s.shape == (1, 6) for s in out.sequences)
        pool = {frame.tobytes() for frame in emb.frames()}
        assert all(frame.tobytes() in pool for frame in out.frames())

    def test_sequence_unit_keeps_whole_sequences(self, gen):
        emb = random_embedding_set(gen, n_sequences=8, dim=5)
        out = subsample(emb, SampleSpec(max_frames=emb.total_frames // 2, seed=11, unit="sequences"))
        originals = {s.tobytes() for s in emb.sequences}
        assert all(s.tobytes() in originals for s in out.sequences)
        assert out.total_frames <= emb.total_frames // 2

    def test_sequence_unit_always_keeps_one(self, gen):
        emb = EmbeddingSet.from_sequences([gen.standard_normal((10, 3))])
        out = subsample(emb, SampleSpec(max_frames=2, seed=0, unit="sequences"))
        assert out.n_sequences == 1

    def test_deterministic_across_calls(self, gen):
        emb = random_embedding_set(gen, n_sequences=20, dim=4)
        spec = SampleSpec(max_frames=9, seed=123, unit="frames")
        assert subsample(emb, spec) == subsample(emb, spec)
        spec_seq = SampleSpec(max_frames=9, seed=123, unit="sequences")
        assert subsample(emb, spec_seq) == subsample(emb, spec_seq)

    def test_different_seeds_differ(self, gen):
        emb = EmbeddingSet.from_sequences([gen.standard_normal((1, 2)) for _ in range(1000)])
        a = subsample(emb, SampleSpec(max_frames=100, seed=1, unit="frames"))
        b = subsample(emb, SampleSpec(max_frames=100, seed=2, unit="frames"))
        assert a != b

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            SampleSpec(max_frames=0)
        with pytest.raises(ValueError):
            SampleSpec(unit="utterances")


class TestManifest:
    def entries(self, tmp_path, gen, n=3):
        out = []
        for i in range(n):
            _, path = write_fixture(tmp_path / f"m{i}", gen)
            out.append(
                ManifestEntry(model_id=f"m{i}", checkpoint_step=50_000, layer=12, path=path, dataset_tag="dev")
            )
        return out

    def test_round_trip(self, tmp_path, gen):
        (tmp_path / "m0").mkdir()
        (tmp_path / "m1").mkdir()
        (tmp_path / "m2").mkdir()
        entries = self.entries(tmp_path, gen)
        mpath = tmp_path / "manifest.json"
        write_manifest(entries, mpath)
        manifest = load_manifest(mpath)
        assert len(manifest) == 3
        assert [e.model_id for e in manifest] == ["m0", "m1", "m2"]
        assert all(e.path.is_file() for e in manifest)

    def test_duplicate_key_rejected(self, tmp_path, gen):
        (tmp_path / "m0").mkdir()
        entry = self.entries(tmp_path, gen, n=1)[0]
        mpath = tmp_path / "manifest.json"
        write_manifest([entry, entry], mpath)
        with pytest.raises(FormatError, match="duplicate"):
            load_manifest(mpath)

    def test_missing_file_rejected(self, tmp_path):
        mpath = tmp_path / "manifest.json"
        mpath.write_text(
            json.dumps(
                [{"model_id": "x", "checkpoint_step": 0, "layer": 0, "path": "gone.embd", "dataset_tag": ""}]
            )
        )
        with pytest.raises(FormatError, match="does not resolve"):
            load_manifest(mpath)

    def test_missing_keys_rejected(self, tmp_path):
        mpath = tmp_path / "manifest.json"
        mpath.write_text(json.dumps([{"model_id": "x"}]))
        with pytest.raises(FormatError, match="missing keys"):
            load_manifest(mpath)

    def test_not_json(self, tmp_path):
        mpath = tmp_path / "manifest.json"
        mpath.write_text("not json at all")
        with pytest.raises(FormatError, match="not valid JSON"):
            load_manifest(mpath)
