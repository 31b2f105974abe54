import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acpl.density import (build_index, density_score, density_scores, knn_label, knn_labels,
                          knn_query, knn_search, l2_normalize)
from acpl.errors import IndexBuildError, NormalizationError, ShapeError


def test_single_anchor_density_is_cosine():
    idx = build_index([4], [[1.0, 0.0]], k=1)
    assert density_score(idx, [1.0, 1.0]) == pytest.approx(1 / np.sqrt(2))


def test_two_anchor_mean():
    idx = build_index([0, 1], [[1.0, 0.0], [0.0, 1.0]], k=2)
    # cosines are 0.6 and 0.8
    assert density_score(idx, [3.0, 4.0]) == pytest.approx(0.7)


def test_k_larger_than_pool_uses_all():
    idx = build_index([0, 1], [[1.0, 0.0], [0.0, 1.0]], k=50)
    assert idx.effective_k == 2
    assert density_score(idx, [3.0, 4.0]) == pytest.approx(0.7)


def test_duplicate_anchor_counts_twice():
    idx = build_index([0, 1, 2], [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], k=2)
    assert density_score(idx, [1.0, 0.1]) == pytest.approx(1 / np.sqrt(1.01))


def test_zero_norm_rejected():
    idx = build_index([0], [[1.0, 0.0]], k=1)
    with pytest.raises(NormalizationError):
        density_score(idx, [0.0, 0.0])
    with pytest.raises(NormalizationError):
        l2_normalize([[0.0, 0.0]])


def test_empty_and_duplicate_ids_rejected():
    with pytest.raises(IndexBuildError):
        build_index([], np.zeros((0, 2)))
    with pytest.raises(IndexBuildError):
        build_index([1, 1], [[1.0, 0.0], [0.0, 1.0]])


def test_dimension_mismatch():
    idx = build_index([0], [[1.0, 0.0]], k=1)
    with pytest.raises(ShapeError):
        density_score(idx, [1.0, 0.0, 0.0])


def test_tie_broken_by_smaller_id():
    idx = build_index([9, 3, 5], [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], k=1)
    [nb] = knn_query(idx, [1.0, 0.0])
    assert nb.id == 3


def test_knn_label_average():
    labels = [[1, 0, 0], [0, 1, 0], [0, 1, 0]]
    idx = build_index([0, 1, 2], [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]], labels, k=2,
                      task_kind="multiclass")
    lab = knn_label(idx, [1.0, 0.05])
    np.testing.assert_allclose(lab.values, [0.5, 0.5, 0.0])
    assert lab.hardness == "soft"


def test_knn_label_soft_anchor_labels():
    labels = [[0.8, 0.2], [0.4, 0.6]]
    idx = build_index([0, 1], [[1.0, 0.0], [0.0, 1.0]], labels, k=2, task_kind="multiclass")
    np.testing.assert_allclose(knn_labels(idx, [[1.0, 1.0]])[0], [0.6, 0.4])


def test_knn_labels_need_labels():
    idx = build_index([0], [[1.0, 0.0]], k=1)
    with pytest.raises(ValueError):
        knn_labels(idx, [[1.0, 0.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(1, 8), st.integers(1, 10), st.integers(0, 2**31))
def test_batch_search_matches_exhaustive(n, dim, k, seed):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, dim))
    ids = rng.permutation(1000)[:n]
    q = rng.normal(size=(5, dim))
    idx = build_index(ids, feats, k=k)
    rows, sims = knn_search(idx, q)
    kk = min(k, n)
    for j in range(5):
        cos = [(-float(np.dot(q[j], f) / np.linalg.norm(q[j]) / np.linalg.norm(f)), int(i))
               for i, f in zip(ids, feats)]
        cos.sort()
        want_ids = [i for _, i in cos[:kk]]
        got_ids = idx.ids[rows[j]].tolist()
        want_sims = [-c for c, _ in cos[:kk]]
        np.testing.assert_allclose(sims[j], want_sims, atol=1e-12)
        # equal-similarity neighbours may swap only among themselves
        assert sorted(got_ids) == sorted(want_ids) or np.allclose(sims[j][-1], want_sims[-1])
    d = density_scores(idx, q)
    assert np.all(d <= 1.0 + 1e-12) and np.all(d >= -1.0 - 1e-12)
