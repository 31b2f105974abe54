import numpy as np
import pytest

from acpl.asp import connectivity_count, connectivity_counts, purify
from acpl.density import build_index
from acpl.errors import ConsistencyError


def _unit(deg):
    r = np.deg2rad(deg)
    return [np.cos(r), np.sin(r)]


def _toy():
    # anchors at 0 and 90 degrees, unlabelled points spread between them
    anchors = build_index([100, 101], [_unit(0), _unit(90)], k=1)
    u_ids = [0, 1, 2, 3]
    u_feat = np.array([_unit(5), _unit(40), _unit(50), _unit(85)])
    unl = build_index(u_ids, u_feat, k=1)
    return anchors, unl, u_ids, u_feat


def test_hand_counts_k1():
    anchors, unl, ids, feat = _toy()
    c = connectivity_counts(ids, feat, unl, anchors)
    # anchor 0 deg picks id 0, anchor 90 deg picks id 3
    assert c.tolist() == [1, 0, 0, 1]
    assert connectivity_count(1, feat[1], unl, anchors) == 0


def test_purify_keeps_least_connected():
    anchors, unl, ids, feat = _toy()
    rep = purify(ids, feat, unl, anchors)
    assert rep.threshold == 0
    assert rep.selected == [1, 2]
    assert rep.to_dict()["counts"] == {"0": 1, "1": 0, "2": 0, "3": 1}


def test_all_equal_counts_keeps_everyone():
    anchors, unl, ids, feat = _toy()
    rep = purify([0, 3], feat[[0, 3]], unl, anchors)
    assert rep.selected == [0, 3]


def test_empty_candidates():
    anchors, unl, _, _ = _toy()
    rep = purify([], np.zeros((0, 2)), unl, anchors)
    assert rep.selected == [] and rep.threshold is None


def test_candidate_missing_from_unlabelled_pool():
    anchors, unl, _, feat = _toy()
    with pytest.raises(ConsistencyError):
        connectivity_counts([42], feat[:1], unl, anchors)


def test_k_override():
    anchors, unl, ids, feat = _toy()
    c = connectivity_counts(ids, feat, unl, anchors, k=2)
    # with K=2 every candidate has both anchors as neighbours
    assert c.tolist() == [1, 1, 1, 1]
