import os
import subprocess
import sys

import numpy as np
import pytest

from acpl import kernels
from acpl._accel import HAS_NUMBA

needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_topk_backends_agree(seed):
    rng = np.random.default_rng(seed)
    sims = np.round(rng.uniform(-1, 1, (30, 40)), 1)  # rounding forces ties
    for k in (1, 3, 40):
        a = kernels.topk_rows_numpy(sims, k)
        b = kernels.topk_rows_jit(sims, k)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


def test_topk_ties_prefer_lower_column():
    sims = np.array([[0.5, 0.9, 0.9, 0.1]])
    cols, vals = kernels.topk_rows_numpy(sims, 2)
    assert cols.tolist() == [[1, 2]]
    assert vals.tolist() == [[0.9, 0.9]]


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_connectivity_backends_agree(seed):
    rng = np.random.default_rng(seed)
    cand_anchor = rng.integers(0, 8, (12, 3))
    anchor_unl = rng.integers(0, 20, (8, 3))
    pos = rng.permutation(20)[:12]
    np.testing.assert_array_equal(
        kernels.connectivity_counts_numpy(cand_anchor, anchor_unl, pos),
        kernels.connectivity_counts_jit(cand_anchor, anchor_unl, pos))


@needs_numba
def test_gmm_backends_agree():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 200)
    args = (np.array([-0.5, 0.0, 0.6]), np.array([0.01, 0.2, 0.05]), np.array([0.2, 0.0, 0.8]))
    a_lj, a_n = kernels.gmm_log_joint_numpy(x, *args)
    b_lj, b_n = kernels.gmm_log_joint_jit(x, *args)
    np.testing.assert_allclose(a_lj, b_lj, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a_n, b_n, rtol=1e-12, atol=1e-12)
    assert np.all(np.isneginf(a_lj[:, 1]))


def test_env_flag_selects_numpy_path():
    env = dict(os.environ, ACPL_DISABLE_NUMBA="1")
    code = ("import acpl, acpl.kernels as k;"
            "print(acpl.backend_name(), k.topk_rows is k.topk_rows_numpy)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    assert out == ["numpy", "True"]
