"""Exact cosine KNN over anchor features: density scores and KNN label votes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import LabelVector
from .errors import IndexBuildError, NormalizationError, ShapeError

_MIN_NORM = 1e-12


def l2_normalize(x):
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms < _MIN_NORM):
        raise NormalizationError("cannot normalise a zero-norm feature vector")
    return x / norms


@dataclass(frozen=True)
class Neighbour:
    id: int
    similarity: float
    label: LabelVector | None


@dataclass(frozen=True)
class AnchorIndex:
    """Unit-norm features sorted by sample id, with optional label rows."""

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None
    k: int
    task_kind: str | None = None

    def __len__(self):
        return self.ids.shape[0]

    @property
    def effective_k(self):
        return min(self.k, len(self))

    def positions(self, ids):
        pos = np.searchsorted(self.ids, ids)
        pos = np.clip(pos, 0, len(self) - 1)
        return pos, self.ids[pos] == ids


def build_index(ids, features, labels=None, k=1, task_kind=None) -> AnchorIndex:
    ids = np.asarray(ids, dtype=np.int64)
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if ids.size == 0:
        raise IndexBuildError("cannot build an index over an empty anchor set")
    if features.shape[0] != ids.size:
        raise ShapeError("ids and features are not aligned")
    if k < 1:
        raise ValueError("K must be >= 1")
    order = np.argsort(ids, kind="stable")
    if np.any(np.diff(ids[order]) == 0):
        raise IndexBuildError("duplicate anchor ids")
    feats = l2_normalize(features[order])
    labs = None
    if labels is not None:
        labs = np.atleast_2d(np.asarray(labels, dtype=np.float64))[order]
        if labs.shape[0] != ids.size:
            raise ShapeError("ids and labels are not aligned")
    return AnchorIndex(ids[order], feats, labs, int(k), task_kind)


def cosine_matrix(index: AnchorIndex, queries):
    q = l2_normalize(np.atleast_2d(queries))
    if q.shape[1] != index.features.shape[1]:
        raise ShapeError(f"query dimension {q.shape[1]} != index dimension "
                         f"{index.features.shape[1]}")
    return np.clip(q @ index.features.T, -1.0, 1.0)


def knn_search(index: AnchorIndex, queries, k=None):
    """Batch search. Returns ``(rows, sims)`` of shape ``(m, k_eff)``, rows
    being positions in ``index``; ordered by descending similarity, ties by
    ascending id."""
    k_eff = min(index.k if k is None else int(k), len(index))
    return kernels.topk_rows(cosine_matrix(index, queries), k_eff)


def knn_query(index: AnchorIndex, q) -> list[Neighbour]:
    q = np.asarray(q, dtype=np.float64)
    rows, sims = knn_search(index, q[None, :])
    out = []
    for r, s in zip(rows[0], sims[0]):
        lab = None
        if index.labels is not None:
            lab = LabelVector(index.labels[r], index.task_kind or "multilabel", "soft")
        out.append(Neighbour(int(index.ids[r]), float(s), lab))
    return out


def density_scores(index: AnchorIndex, queries):
    """Mean cosine similarity to the K nearest anchors, per query row."""
    _, sims = knn_search(index, queries)
    return sims.mean(axis=1)


def density_score(index: AnchorIndex, q) -> float:
    return float(density_scores(index, np.asarray(q, dtype=np.float64)[None, :])[0])


def knn_labels(index: AnchorIndex, queries):
    """Mean label vector of the K nearest anchors, per query row."""
    if index.labels is None:
        raise ValueError("index carries no labels")
    rows, _ = knn_search(index, queries)
    return np.clip(index.labels[rows].mean(axis=1), 0.0, 1.0)


def knn_label(index: AnchorIndex, q) -> LabelVector:
    y = knn_labels(index, np.asarray(q, dtype=np.float64)[None, :])[0]
    return LabelVector(y, index.task_kind or "multilabel", "soft")
