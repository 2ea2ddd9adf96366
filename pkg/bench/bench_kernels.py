#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs each hot kernel on representative workloads under both backends and
prints a timing table. The numpy path is selected by re-executing this
script with MOTIONGRAPH_DISABLE_NUMBA=1, so both timings come from a fresh
interpreter with the same code path a user would hit.

    python bench/bench_kernels.py            # compares both backends
    python bench/bench_kernels.py --inner    # one backend (internal use)
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats=3):
    fn()  # warm-up (includes JIT compilation on the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_benchmarks():
    from motiongraph import fixtures, kernels
    from motiongraph.pose import compute_joint_states
    from motiongraph.silhouette import default_camera, rasterize_sequence

    results = {"backend": kernels.BACKEND}
    rng = np.random.default_rng(7)

    # Rasterization: 200 puppet frames at 256x256.
    skeleton = fixtures.puppet_skeleton()
    sequence = fixtures.puppet_sequence(200)
    states = compute_joint_states(skeleton, sequence)
    camera = default_camera()
    positions = [s.positions for s in states]
    results["rasterize_200f_256px"] = _time(
        lambda: rasterize_sequence(skeleton, positions, camera)
    )

    # Pairwise mask intersections: 20k random pairs of packed 256x256 masks.
    masks = rasterize_sequence(skeleton, positions, camera)
    packed = kernels.pack_masks(masks)
    pairs = rng.integers(0, masks.shape[0], size=(20000, 2))
    results["popcount_20k_pairs"] = _time(lambda: kernels.pair_intersections(packed, pairs))

    # Walk-cost relaxation: 2000 nodes, ~26k edges, 40-step horizon.
    n = 2000
    nat_src = np.arange(n - 1)
    syn_src = rng.integers(0, n, size=24000)
    syn_off = rng.choice([-120, -3, -2, 2, 3, 120], size=24000)
    syn_dst = np.clip(syn_src + syn_off, 0, n - 1)
    keep = syn_dst != syn_src
    src = np.concatenate([nat_src, syn_src[keep]])
    dst = np.concatenate([nat_src + 1, syn_dst[keep]])
    cost = np.concatenate([np.zeros(n - 1), rng.uniform(0.01, 0.5, size=keep.sum())])
    allowed = np.ones(n, dtype=bool)
    allowed[rng.integers(0, n, size=60)] = False

    def dp():
        for start in (5, 500, 1500):
            kernels.walk_distances(src, dst, cost, n, start, allowed, 40)

    results["walk_dp_3starts_40steps"] = _time(dp)
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--inner", action="store_true", help="run one backend and dump JSON")
    args = parser.parse_args()

    if args.inner:
        print(json.dumps(run_benchmarks()))
        return

    here = os.path.dirname(os.path.abspath(__file__))
    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, MOTIONGRAPH_DISABLE_NUMBA=disable)
        out = subprocess.run(
            [sys.executable, os.path.join(here, "bench_kernels.py"), "--inner"],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))

    names = [k for k in rows[0] if k != "backend"]
    width = max(len(n) for n in names)
    print(f"{'kernel':<{width}}  {rows[0]['backend']:>12}  {rows[1]['backend']:>12}  speedup")
    for name in names:
        a, b = rows[0][name], rows[1][name]
        print(f"{name:<{width}}  {a:>11.4f}s  {b:>11.4f}s  {b / a:>6.1f}x")


if __name__ == "__main__":
    main()
