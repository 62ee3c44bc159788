import numpy as np
import pytest

from vocabembed.core import (LabeledFeatures, SemanticVocabulary, build_neighbor_sets,
                             nearest_prototypes, project, sq_distance)
from vocabembed.errors import ShapeError
from vocabembed.synth import oracle_linear_scan


def _vocab(rng, n=8, d=3, n_src=3, n_tgt=2):
    return SemanticVocabulary([f"w{i}" for i in range(n)], rng.standard_normal((n, d)),
                              range(n_src), range(n_src, n_src + n_tgt))


class TestSemanticVocabulary:
    def test_rows_are_unit_norm(self):
        v = _vocab(np.random.default_rng(0))
        np.testing.assert_allclose(np.linalg.norm(v.vectors, axis=1), 1.0, rtol=0, atol=1e-15)
        assert v.normalized

    def test_normalize_off_keeps_vectors(self):
        raw = np.array([[3.0, 4.0], [1.0, 0.0]])
        v = SemanticVocabulary(["a", "b"], raw, normalize=False)
        np.testing.assert_array_equal(v.vectors, raw)

    def test_frozen(self):
        v = _vocab(np.random.default_rng(0))
        with pytest.raises(ValueError):
            v.vectors[0, 0] = 1.0

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            SemanticVocabulary(["a", "a"], np.eye(2))

    def test_overlapping_splits_rejected(self):
        with pytest.raises(ValueError, match="disjoint"):
            SemanticVocabulary(["a", "b"], np.eye(2), [0], [0])

    def test_zero_vector_cannot_be_normalized(self):
        with pytest.raises(ValueError, match="zero vector"):
            SemanticVocabulary(["a", "b"], [[0.0, 0.0], [1.0, 0.0]])

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            SemanticVocabulary(["a"], np.eye(2))
        with pytest.raises(ShapeError):
            SemanticVocabulary(["a"], [1.0, 2.0])

    def test_index_and_open_ids(self):
        v = _vocab(np.random.default_rng(0))
        assert v.index("w4") == 4 and "w4" in v and "nope" not in v
        np.testing.assert_array_equal(v.open_ids, np.arange(3, 8))
        with pytest.raises(KeyError):
            v.index("nope")

    def test_subset_keeps_bits_and_splits(self):
        v = _vocab(np.random.default_rng(1))
        sub = v.subset([0, 2, 3, 4])
        np.testing.assert_array_equal(sub.vectors, v.vectors[[0, 2, 3, 4]])
        np.testing.assert_array_equal(sub.source_ids, [0, 1])
        np.testing.assert_array_equal(sub.target_ids, [2, 3])
        assert sub.labels == ("w0", "w2", "w3", "w4")

    def test_synset_includes_label(self):
        v = SemanticVocabulary(["a", "b", "c"], np.eye(3), synsets={"a": ["b", "a"], "zz": ["c"]})
        assert v.synset("a") == ("a", "b")
        assert v.synset("c") == ("c",)
        assert "zz" not in v.synsets


class TestLabeledFeatures:
    def test_mismatch(self):
        with pytest.raises(ShapeError):
            LabeledFeatures(np.zeros((3, 2)), [0, 1])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            LabeledFeatures(np.array([[np.nan, 1.0]]), [0])

    def test_check_source(self):
        v = _vocab(np.random.default_rng(0))
        LabeledFeatures(np.zeros((2, 2)), [0, 2]).check_source(v)
        with pytest.raises(ValueError, match="w5"):
            LabeledFeatures(np.zeros((2, 2)), [0, 5]).check_source(v)


class TestProjection:
    def test_project_matches_loop(self):
        rng = np.random.default_rng(2)
        W, x = rng.standard_normal((5, 3)), rng.standard_normal(5)
        expect = [sum(W[r, j] * x[r] for r in range(5)) for j in range(3)]
        np.testing.assert_allclose(project(W, x), expect, rtol=1e-14)

    def test_project_shape_error(self):
        with pytest.raises(ShapeError):
            project(np.zeros((4, 2)), np.zeros(3))

    def test_sq_distance(self):
        assert sq_distance([1.0, 2.0], [4.0, 6.0]) == 25.0
        with pytest.raises(ShapeError):
            sq_distance([1.0], [1.0, 2.0])


class TestNearestPrototypes:
    def test_matches_linear_scan(self):
        rng = np.random.default_rng(3)
        v = _vocab(rng, n=60, d=5)
        q = rng.standard_normal(5)
        cand = rng.choice(60, 25, replace=False)
        _, want = oracle_linear_scan(q, v.vectors[np.sort(cand)], np.sort(cand), 7)
        np.testing.assert_array_equal(nearest_prototypes(q, v, cand, 7), want[0])

    def test_tie_goes_to_lowest_index(self):
        v = SemanticVocabulary(["a", "b", "c"], [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]],
                               normalize=False)
        # equidistant from every prototype
        assert nearest_prototypes(np.zeros(2), v, [2, 1, 0], 1)[0] == 0
        np.testing.assert_array_equal(nearest_prototypes(np.zeros(2), v, [2, 1], 2), [1, 2])

    def test_candidate_order_irrelevant(self):
        rng = np.random.default_rng(4)
        v = _vocab(rng, n=30, d=3)
        q = rng.standard_normal(3)
        cand = np.arange(30)
        np.testing.assert_array_equal(nearest_prototypes(q, v, cand, 5),
                                      nearest_prototypes(q, v, cand[::-1], 5))

    def test_empty_candidates(self):
        v = _vocab(np.random.default_rng(0))
        with pytest.raises(ValueError):
            nearest_prototypes(np.zeros(3), v, [], 1)


class TestNeighborSets:
    def test_zero_counts(self):
        v = _vocab(np.random.default_rng(0))
        ns = build_neighbor_sets(v, 0, 0)
        assert ns.av_ids.shape == (3, 0) and ns.bs_ids.shape == (3, 0)

    def test_exhaustion_gives_distance_order(self):
        # 3 source, 2 target, nothing else: A_V=2 returns both targets by distance
        v = SemanticVocabulary(list("abcde"), [[1, 0], [0, 1], [-1, 0], [0.9, 0.1], [-0.2, -1]],
                               [0, 1, 2], [3, 4])
        ns = build_neighbor_sets(v, 2, 5)
        np.testing.assert_array_equal(ns.av_ids[0], [3, 4])
        np.testing.assert_array_equal(ns.av_ids[2], [4, 3])
        assert ns.bs_ids.shape == (3, 2)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        v = _vocab(rng, n=50, d=6, n_src=20, n_tgt=10)
        ns = build_neighbor_sets(v, 5, 5)
        U = v.vectors
        for row, c in enumerate(v.source_ids):
            dist = [(float(np.sum((U[c] - U[j]) ** 2)), j) for j in range(50)]
            opens = sorted(t for t in dist if t[1] >= 20)[:5]
            srcs = sorted(t for t in dist if t[1] < 20 and t[1] != c)[:5]
            assert list(ns.av_ids[row]) == [j for _, j in opens]
            assert list(ns.bs_ids[row]) == [j for _, j in srcs]
            assert c not in ns.bs_ids[row]
            assert not np.isin(ns.av_ids[row], v.source_ids).any()

    def test_negative_count(self):
        with pytest.raises(ValueError):
            build_neighbor_sets(_vocab(np.random.default_rng(0)), -1, 0)
