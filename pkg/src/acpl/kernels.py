"""Hot inner loops, each with a numba kernel and a numpy twin.

The public names (``topk_rows``, ``connectivity_counts``, ``gmm_log_joint``)
are bound once at import time according to :data:`acpl._accel.USE_NUMBA`.
Both implementations stay importable as ``*_numpy`` / ``*_jit`` so tests and
the benchmark can compare them directly.
"""
import math

import numpy as np
from scipy.special import logsumexp

from ._accel import HAS_NUMBA, USE_NUMBA, njit

_LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# top-k selection over a similarity matrix
# --------------------------------------------------------------------------

def topk_rows_numpy(sims, k):
    """Per row, the ``k`` largest entries in descending order.

    Ties go to the smaller column index (stable sort on the negated values).
    Returns ``(columns, values)``, both shaped ``(m, k)``.
    """
    sims = np.ascontiguousarray(sims, dtype=np.float64)
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    return order.astype(np.int64), np.take_along_axis(sims, order, axis=1)


@njit(cache=True)
def _topk_rows_kernel(sims, k):
    m, n = sims.shape
    cols = np.empty((m, k), dtype=np.int64)
    vals = np.empty((m, k), dtype=np.float64)
    for r in range(m):
        filled = 0
        for j in range(n):
            v = sims[r, j]
            if filled == k and v <= vals[r, k - 1]:
                continue
            # columns arrive in ascending order, so a tie never displaces
            pos = filled if filled < k else k - 1
            while pos > 0 and vals[r, pos - 1] < v:
                if pos < k:
                    vals[r, pos] = vals[r, pos - 1]
                    cols[r, pos] = cols[r, pos - 1]
                pos -= 1
            vals[r, pos] = v
            cols[r, pos] = j
            if filled < k:
                filled += 1
    return cols, vals


def topk_rows_jit(sims, k):
    sims = np.ascontiguousarray(sims, dtype=np.float64)
    return _topk_rows_kernel(sims, int(k))


# --------------------------------------------------------------------------
# reverse-KNN membership counts (anchor set purification)
# --------------------------------------------------------------------------

def connectivity_counts_numpy(cand_anchor_nn, anchor_unl_nn, cand_unl_pos):
    """Count, per candidate, the anchors whose unlabelled KNN list holds it.

    ``cand_anchor_nn[i]`` lists anchor rows nearest to candidate ``i``;
    ``anchor_unl_nn[a]`` lists unlabelled rows nearest to anchor ``a``;
    ``cand_unl_pos[i]`` is the candidate's own row in the unlabelled index.
    Each anchor contributes at most one.
    """
    lists = anchor_unl_nn[cand_anchor_nn]  # (m, k_a, k_u)
    hit = (lists == cand_unl_pos[:, None, None]).any(axis=2)
    return hit.sum(axis=1).astype(np.int64)


@njit(cache=True)
def _connectivity_kernel(cand_anchor_nn, anchor_unl_nn, cand_unl_pos):
    m, ka = cand_anchor_nn.shape
    ku = anchor_unl_nn.shape[1]
    out = np.zeros(m, dtype=np.int64)
    for i in range(m):
        target = cand_unl_pos[i]
        c = 0
        for a in range(ka):
            row = cand_anchor_nn[i, a]
            for u in range(ku):
                if anchor_unl_nn[row, u] == target:
                    c += 1
                    break
        out[i] = c
    return out


def connectivity_counts_jit(cand_anchor_nn, anchor_unl_nn, cand_unl_pos):
    return _connectivity_kernel(
        np.ascontiguousarray(cand_anchor_nn, dtype=np.int64),
        np.ascontiguousarray(anchor_unl_nn, dtype=np.int64),
        np.ascontiguousarray(cand_unl_pos, dtype=np.int64),
    )


# --------------------------------------------------------------------------
# 1-D Gaussian mixture E-step
# --------------------------------------------------------------------------

def gmm_log_joint_numpy(x, means, variances, weights):
    """log(pi_k) + log N(x_i; mu_k, var_k) for every point and component,
    plus the per-point log normaliser. Zero weights give ``-inf`` columns."""
    x = np.asarray(x, dtype=np.float64)[:, None]
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    lj = logw - 0.5 * (_LOG_2PI + np.log(variances) + (x - means) ** 2 / variances)
    return lj, logsumexp(lj, axis=1)


@njit(cache=True)
def _gmm_log_joint_kernel(x, means, variances, weights):
    n = x.shape[0]
    m = means.shape[0]
    lj = np.empty((n, m), dtype=np.float64)
    norm = np.empty(n, dtype=np.float64)
    logw = np.empty(m, dtype=np.float64)
    logv = np.empty(m, dtype=np.float64)
    for k in range(m):
        logw[k] = math.log(weights[k]) if weights[k] > 0.0 else -np.inf
        logv[k] = math.log(variances[k])
    for i in range(n):
        best = -np.inf
        for k in range(m):
            diff = x[i] - means[k]
            v = logw[k] - 0.5 * (_LOG_2PI + logv[k] + diff * diff / variances[k])
            lj[i, k] = v
            if v > best:
                best = v
        if best == -np.inf:
            norm[i] = -np.inf
            continue
        s = 0.0
        for k in range(m):
            s += math.exp(lj[i, k] - best)
        norm[i] = best + math.log(s)
    return lj, norm


def gmm_log_joint_jit(x, means, variances, weights):
    return _gmm_log_joint_kernel(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        np.ascontiguousarray(variances, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
    )


if not HAS_NUMBA:  # pragma: no cover
    topk_rows_jit = topk_rows_numpy
    connectivity_counts_jit = connectivity_counts_numpy
    gmm_log_joint_jit = gmm_log_joint_numpy

if USE_NUMBA:
    topk_rows = topk_rows_jit
    connectivity_counts = connectivity_counts_jit
    gmm_log_joint = gmm_log_joint_jit
else:
    topk_rows = topk_rows_numpy
    connectivity_counts = connectivity_counts_numpy
    gmm_log_joint = gmm_log_joint_numpy
