import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bilex.embeddings import (EmbeddingMatrix, SynthSpec, load_embeddings,
                              normalize, synth_pair, write_embeddings)
from bilex.errors import EmbeddingFormatError
from bilex.retrieval import procrustes


def write_vec(path, header, rows):
    lines = [header] + rows
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestLoad:
    def test_basic_shape(self, tmp_path):
        p = write_vec(tmp_path / "a.vec", "3 4", [
            "alpha 1 2 3 4", "beta 0.5 0 -1 2", "gamma 1 1 1 1"])
        emb = load_embeddings(p, max_vocab=10)
        assert emb.vectors.shape == (3, 4)
        assert emb.words == ("alpha", "beta", "gamma")

    def test_truncation_keeps_first_rows(self, tmp_path):
        p = write_vec(tmp_path / "a.vec", "3 4", [
            "alpha 1 2 3 4", "beta 0.5 0 -1 2", "gamma 1 1 1 1"])
        emb = load_embeddings(p, max_vocab=2)
        assert emb.vectors.shape == (2, 4)
        assert emb.words == ("alpha", "beta")

    def test_duplicate_token_keeps_first(self, tmp_path):
        p = write_vec(tmp_path / "a.vec", "3 4", [
            "alpha 1 2 3 4", "alpha 9 9 9 9", "gamma 1 1 1 1"])
        emb = load_embeddings(p, max_vocab=10)
        assert emb.words == ("alpha", "gamma")
        np.testing.assert_allclose(emb.vectors[0], [1, 2, 3, 4])

    def test_wrong_field_count_skipped(self, tmp_path):
        p = write_vec(tmp_path / "a.vec", "3 4", [
            "alpha 1 2 3 4", "broken 1 2", "gamma 1 1 1 1"])
        emb = load_embeddings(p)
        assert emb.words == ("alpha", "gamma")

    def test_nonfinite_rejected(self, tmp_path):
        p = write_vec(tmp_path / "a.vec", "3 2", [
            "alpha 1 2", "bad nan 1", "gamma inf 1"])
        emb = load_embeddings(p)
        assert emb.words == ("alpha",)

    def test_zero_row_rejected(self, tmp_path):
        p = write_vec(tmp_path / "a.vec", "2 3", ["a 0 0 0", "b 1 0 0"])
        emb = load_embeddings(p)
        assert emb.words == ("b",)

    @pytest.mark.parametrize("header", ["", "3", "a b", "3 4 5", "-1 4"])
    def test_malformed_header(self, tmp_path, header):
        p = write_vec(tmp_path / "a.vec", header, ["alpha 1 2 3 4"])
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(p)

    def test_empty_file_errors(self, tmp_path):
        p = write_vec(tmp_path / "a.vec", "2 3", ["a 0 0 0"])
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(p)

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        emb = normalize(EmbeddingMatrix(
            tuple(f"w{i}" for i in range(20)),
            rng.standard_normal((20, 7)), "xx"), "unit")
        path = tmp_path / "out.vec"
        write_embeddings(path, emb)
        back = load_embeddings(path, lang_tag="xx")
        assert back.words == emb.words
        np.testing.assert_allclose(back.vectors, emb.vectors, atol=1e-6)


class TestNormalize:
    def test_unit_row(self):
        emb = EmbeddingMatrix(("a",), np.array([[3.0, 4.0]]))
        out = normalize(emb, "unit")
        np.testing.assert_allclose(out.vectors[0], [0.6, 0.8])

    def test_none_is_identity(self):
        emb = EmbeddingMatrix(("a", "b"), np.array([[3.0, 4.0], [1.0, 2.0]]))
        assert normalize(emb, "none") is emb

    def test_center_unit_symmetric_rows(self):
        emb = EmbeddingMatrix(("a", "b"), np.array([[1.0, 0.0], [-1.0, 0.0]]))
        out = normalize(emb, "center_unit")
        np.testing.assert_allclose(out.vectors, emb.vectors)

    def test_zero_row_errors(self):
        emb = EmbeddingMatrix(("a", "b"), np.array([[0.0, 0.0], [1.0, 0.0]]))
        with pytest.raises(ValueError):
            normalize(emb, "unit")

    @given(arrays(np.float64, (4, 3),
                  elements=st.floats(-10, 10, allow_nan=False),
                  fill=st.nothing()))
    @settings(max_examples=50, deadline=None)
    def test_unit_idempotent(self, mat):
        if (np.linalg.norm(mat, axis=1) < 1e-6).any():
            return
        emb = EmbeddingMatrix(("a", "b", "c", "d"), mat)
        once = normalize(emb, "unit")
        twice = normalize(once, "unit")
        np.testing.assert_allclose(twice.vectors, once.vectors, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(once.vectors, axis=1), 1.0,
                                   atol=1e-6)


class TestSynthPair:
    def test_zero_noise_is_exact_rotation(self):
        src, tgt, gold, rot = synth_pair(SynthSpec(n=20, d=5, noise_sigma=0.0,
                                                   seed=3))
        cos = np.sum((src.vectors @ rot) * tgt.vectors, axis=1)
        np.testing.assert_allclose(cos, 1.0, atol=1e-6)

    def test_seeded_determinism(self):
        a = synth_pair(SynthSpec(n=5, d=3, noise_sigma=0.0, seed=7))
        b = synth_pair(SynthSpec(n=5, d=3, noise_sigma=0.0, seed=7))
        assert a[0].words == b[0].words
        assert a[1].words == b[1].words
        np.testing.assert_array_equal(a[0].vectors, b[0].vectors)
        np.testing.assert_array_equal(a[1].vectors, b[1].vectors)
        assert a[2].pairs == b[2].pairs

    def test_procrustes_recovers_rotation(self):
        src, tgt, gold, rot = synth_pair(SynthSpec(n=60, d=8, noise_sigma=0.0,
                                                   seed=11))
        srcs = np.array([s for s, _ in gold.pairs])
        tgts = np.array([t for _, t in gold.pairs])
        w = procrustes(src.vectors[srcs], tgt.vectors[tgts]).weight
        assert np.linalg.norm(w.T - rot) < 1e-6

    def test_gold_is_bijection(self):
        _, _, gold, _ = synth_pair(SynthSpec(n=15, d=4, seed=0))
        assert sorted(s for s, _ in gold.pairs) == list(range(15))
        assert sorted(t for _, t in gold.pairs) == list(range(15))

    def test_target_names_permuted(self):
        _, tgt, _, _ = synth_pair(SynthSpec(n=50, d=4, seed=1))
        assert list(tgt.words) != sorted(tgt.words)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SynthSpec(n=1, d=4)
        with pytest.raises(ValueError):
            SynthSpec(n=4, d=1)
        with pytest.raises(ValueError):
            SynthSpec(n=4, d=4, noise_sigma=-0.1)


class TestEmbeddingMatrix:
    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(("a", "a"), np.eye(2))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(("a", "b"), np.array([[1.0, np.nan], [0, 1]]))

    def test_vectors_read_only(self):
        emb = EmbeddingMatrix(("a",), np.array([[1.0, 2.0]]))
        with pytest.raises(ValueError):
            emb.vectors[0, 0] = 5.0

    def test_index_lookup(self):
        emb = EmbeddingMatrix(("a", "b"), np.eye(2))
        assert emb.index("b") == 1
        assert "a" in emb and "z" not in emb
