"""Anchor set purification: admit only the least-connected pseudo-labelled
samples into the anchor set.

A candidate's connectivity is the number of its K nearest anchors that list
the candidate among their own K nearest unlabelled samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .density import AnchorIndex, knn_search
from .errors import ConsistencyError


@dataclass
class ConnectivityReport:
    counts: dict = field(default_factory=dict)
    threshold: int | None = None
    selected: list = field(default_factory=list)

    def to_dict(self):
        return {"threshold": self.threshold, "selected": list(self.selected),
                "counts": {str(k): v for k, v in sorted(self.counts.items())}}


def connectivity_counts(cand_ids, cand_features, unlabelled_index: AnchorIndex,
                        anchor_index: AnchorIndex, k=None) -> np.ndarray:
    cand_ids = np.asarray(cand_ids, dtype=np.int64)
    if cand_ids.size == 0:
        return np.zeros(0, dtype=np.int64)
    pos, found = unlabelled_index.positions(cand_ids)
    if not np.all(found):
        missing = cand_ids[~found][0]
        raise ConsistencyError(f"candidate {missing} is not in the unlabelled index")
    cand_anchor, _ = knn_search(anchor_index, cand_features, k)
    anchor_unl, _ = knn_search(unlabelled_index, anchor_index.features, k)
    return kernels.connectivity_counts(cand_anchor, anchor_unl, pos)


def connectivity_count(x_id, x_feature, unlabelled_index: AnchorIndex,
                       anchor_index: AnchorIndex, k=None) -> int:
    feats = np.asarray(x_feature, dtype=np.float64)[None, :]
    return int(connectivity_counts([x_id], feats, unlabelled_index, anchor_index, k)[0])


def purify(cand_ids, cand_features, unlabelled_index: AnchorIndex,
           anchor_index: AnchorIndex, k=None) -> ConnectivityReport:
    """Select candidates whose connectivity equals the minimum over all
    candidates. ``unlabelled_index`` must be built over the stage-start
    unlabelled pool, candidates included."""
    cand_ids = np.asarray(cand_ids, dtype=np.int64)
    if cand_ids.size == 0:
        return ConnectivityReport()
    c = connectivity_counts(cand_ids, cand_features, unlabelled_index, anchor_index, k)
    alpha = int(c.min())
    selected = sorted(int(i) for i in cand_ids[c <= alpha])
    return ConnectivityReport({int(i): int(v) for i, v in zip(cand_ids, c)}, alpha, selected)
