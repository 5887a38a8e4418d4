import numpy as np
import pytest

from bilex.dictionaries import Dictionary
from bilex.embeddings import random_orthogonal, unit_rows
from bilex.retrieval import (CslsIndex, CslsParams, build_dictionary,
                             csls_scores, procrustes)


def naive_csls(mapped, tgt, k):
    """Brute-force O(n*m) CSLS oracle: explicit loops, no shared code."""
    mapped = unit_rows(np.asarray(mapped, float))
    tgt = unit_rows(np.asarray(tgt, float))
    n, m = len(mapped), len(tgt)
    cos = np.array([[float(mapped[i] @ tgt[j]) for j in range(m)]
                    for i in range(n)])
    r_t = np.array([np.mean(sorted(cos[i], reverse=True)[:k]) for i in range(n)])
    r_s = np.array([np.mean(sorted(cos[:, j], reverse=True)[:k]) for j in range(m)])
    return np.array([[2 * cos[i, j] - r_t[i] - r_s[j] for j in range(m)]
                     for i in range(n)])


class TestCsls:
    def test_hand_worked_example(self):
        mapped = np.array([[1.0, 0.0], [0.0, 1.0]])
        s2 = np.sqrt(2.0) / 2.0
        tgt = np.array([[1.0, 0.0], [s2, s2]])
        index = csls_scores(mapped, tgt, CslsParams(1))
        scores = index.scores()
        assert scores[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert scores[0, 1] == pytest.approx(2 * s2 - 1.0 - s2, abs=1e-9)
        assert index.nearest()[0] == 0

    def test_identical_sets_self_match(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((12, 4))
        index = csls_scores(x, x, CslsParams(1))
        np.testing.assert_array_equal(index.nearest(), np.arange(12))

    def test_argmax_invariant_to_target_penalty_shift(self):
        rng = np.random.default_rng(1)
        index = csls_scores(rng.standard_normal((6, 3)),
                            rng.standard_normal((9, 3)), CslsParams(2))
        base = index.nearest()
        index.penalty_src = index.penalty_src + 0.37  # shifts all of a query's scores
        np.testing.assert_array_equal(index.nearest(), base)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        n, m, c, k = 17, 23, 5, 3
        mapped = rng.standard_normal((n, c))
        tgt = rng.standard_normal((m, c))
        index = csls_scores(mapped, tgt, CslsParams(k))
        oracle = naive_csls(mapped, tgt, k)
        np.testing.assert_allclose(index.scores(), oracle, atol=1e-10)
        np.testing.assert_array_equal(index.nearest(), oracle.argmax(axis=1))

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            csls_scores(np.eye(3), np.eye(3), CslsParams(4))
        with pytest.raises(ValueError):
            CslsParams(0)

    def test_cosine_mode_is_plain_cosine(self):
        rng = np.random.default_rng(2)
        a, b = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
        index = CslsIndex(a, b, mode="cosine")
        np.testing.assert_allclose(index.scores(),
                                   unit_rows(a) @ unit_rows(b).T, atol=1e-12)

    def test_topk_descending_and_tiebreak(self):
        mapped = np.array([[1.0, 0.0]])
        tgt = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])  # exact tie 0 vs 1
        index = CslsIndex(mapped, tgt, CslsParams(1), mode="cosine")
        idx, val = index.topk(np.array([0]), 3)
        assert list(idx[0][:2]) == [0, 1]  # lower index first on ties
        assert all(x >= y for x, y in zip(val[0], val[0][1:]))


class TestBuildDictionary:
    def test_identical_sets_full_mutual_match(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((10, 4))
        d = build_dictionary(x, x, CslsParams(1), top_n=10)
        assert d.pairs == [(i, i) for i in range(10)]

    def test_contested_target_keeps_reciprocated_source(self):
        # a and b both prefer p; p prefers a; only (a, p) survives.
        mapped = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]])
        tgt = np.array([[1.0, 0.05], [-1.0, 0.2], [0.05, 1.0]])
        d = build_dictionary(mapped, tgt, CslsParams(1), top_n=3)
        pair_dict = dict(d.pairs)
        assert pair_dict.get(0) == 0
        assert 1 not in pair_dict  # b lost the contest for p
        assert pair_dict.get(2) == 2

    def test_oracle_rotation_recovers_gold(self):
        rng = np.random.default_rng(3)
        src = unit_rows(rng.standard_normal((40, 6)))
        q = random_orthogonal(6, rng)
        tgt = src @ q
        d = build_dictionary(src @ q, tgt, CslsParams(3), top_n=40)
        assert d.pairs == [(i, i) for i in range(40)]

    def test_symmetry_under_role_swap(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((12, 5))
        b = rng.standard_normal((12, 5))
        fwd = build_dictionary(a, b, CslsParams(2), top_n=12)
        rev = build_dictionary(b, a, CslsParams(2), top_n=12)
        assert sorted((t, s) for s, t in fwd.pairs) == sorted(rev.pairs)

    def test_sorted_by_source_index(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((15, 4))
        d = build_dictionary(a, rng.standard_normal((15, 4)),
                             CslsParams(2), top_n=15)
        sources = [s for s, _ in d.pairs]
        assert sources == sorted(sources)

    def test_top_n_range(self):
        with pytest.raises(ValueError):
            build_dictionary(np.eye(3), np.eye(3), top_n=4)


class TestProcrustes:
    def test_identity_alignment(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((20, 5))
        w = procrustes(x, x).weight
        np.testing.assert_allclose(w, np.eye(5), atol=1e-10)

    def test_ninety_degree_rotation(self):
        src = np.array([[1.0, 0.0], [0.0, 1.0]])
        tgt = np.array([[0.0, 1.0], [-1.0, 0.0]])
        w = procrustes(src, tgt).weight
        np.testing.assert_allclose(w, [[0.0, -1.0], [1.0, 0.0]], atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_recovers_random_rotation(self, seed):
        rng = np.random.default_rng(seed)
        c = 8
        q = random_orthogonal(c, rng)
        src = rng.standard_normal((30, c))
        tgt = src @ q.T  # rows: tgt_i = q @ src_i
        w = procrustes(src, tgt).weight
        assert np.linalg.norm(w - q) < 1e-6

    def test_output_always_orthogonal(self):
        rng = np.random.default_rng(9)
        # badly conditioned pairs
        src = rng.standard_normal((20, 6)) * np.array([1e6, 1, 1, 1, 1, 1e-6])
        tgt = rng.standard_normal((20, 6))
        w = procrustes(src, tgt).weight
        assert np.linalg.norm(w @ w.T - np.eye(6)) < 1e-8

    def test_minimizer_beats_random_orthogonals(self):
        rng = np.random.default_rng(11)
        src = rng.standard_normal((10, 6))
        tgt = rng.standard_normal((10, 6))
        w = procrustes(src, tgt).weight
        best = np.linalg.norm(src @ w.T - tgt)
        for _ in range(1000):
            r = random_orthogonal(6, rng)
            assert best <= np.linalg.norm(src @ r.T - tgt) + 1e-9

    def test_rank_zero_errors(self):
        with pytest.raises(ValueError):
            procrustes(np.zeros((4, 3)), np.zeros((4, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            procrustes(np.ones((4, 3)), np.ones((4, 2)))


class TestDictionaryType:
    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Dictionary([(0, 1), (0, 1)])

    def test_grouping(self):
        d = Dictionary([(0, 1), (0, 2), (3, 1)])
        assert d.targets_of() == {0: [1, 2], 3: [1]}
        assert d.source_indices() == [0, 3]
