#!/usr/bin/env python3
"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py --anchors 2000 --queries 5000 --k 50

Prints one JSON object per kernel with the median wall time of each path.
"""
import argparse
import json
import statistics
import time

import numpy as np

from acpl import kernels
from acpl._accel import HAS_NUMBA


def _median_time(fn, args, repeats):
    fn(*args)  # warm-up (and JIT compile on the numba path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--anchors", type=int, default=2000)
    ap.add_argument("--queries", type=int, default=5000)
    ap.add_argument("--k", type=int, default=50)
    ap.add_argument("--scores", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(args.seed)
    sims = rng.uniform(-1, 1, (args.queries, args.anchors))
    cand_anchor = rng.integers(0, args.anchors, (args.queries, args.k))
    anchor_unl = rng.integers(0, args.queries, (args.anchors, args.k))
    cand_pos = rng.permutation(args.queries).astype(np.int64)
    x = rng.uniform(0, 1, args.scores)
    gmm = (np.array([0.3, 0.5, 0.8]), np.array([0.01, 0.02, 0.01]), np.array([0.3, 0.4, 0.3]))

    cases = [
        ("topk_rows", kernels.topk_rows_numpy, kernels.topk_rows_jit, (sims, args.k)),
        ("connectivity_counts", kernels.connectivity_counts_numpy,
         kernels.connectivity_counts_jit, (cand_anchor, anchor_unl, cand_pos)),
        ("gmm_log_joint", kernels.gmm_log_joint_numpy, kernels.gmm_log_joint_jit, (x, *gmm)),
    ]
    for name, np_fn, jit_fn, fargs in cases:
        t_np = _median_time(np_fn, fargs, args.repeats)
        t_jit = _median_time(jit_fn, fargs, args.repeats)
        print(json.dumps({"kernel": name, "numpy_s": round(t_np, 6), "numba_s": round(t_jit, 6),
                          "speedup": round(t_np / t_jit, 2)}))


if __name__ == "__main__":
    main()
