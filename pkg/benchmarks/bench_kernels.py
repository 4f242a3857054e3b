"""Benchmark the compiled kernels against the pure-Python/NumPy fallback.

The numba path runs in-process; the fallback timings come from a child
process started with KCOVER_BACKEND=numpy so the whole package really runs
uncompiled there.

Run: python benchmarks/bench_kernels.py [--sizes 16,32,64] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

CHILD_SCRIPT = r"""
import json, sys, time
import numpy as np
from kcover import kernels

spec = json.loads(sys.stdin.read())
heights = np.array(spec["heights"])
sx, sy, z0 = spec["sensor"]
repeat = spec["repeat"]
out = {}

t0 = time.perf_counter()
for _ in range(repeat):
    kernels.field_sweep(heights, sx, sy, z0, 1.0)
out["field_sweep"] = (time.perf_counter() - t0) / repeat

t0 = time.perf_counter()
for _ in range(repeat):
    kernels.field_oracle(heights, sx, sy, z0, 1.0)
out["field_oracle"] = (time.perf_counter() - t0) / repeat

cand = np.argwhere(heights == 0)[: spec["n_cand"]]
ci = np.ascontiguousarray(cand[:, 0])
cj = np.ascontiguousarray(cand[:, 1])
ck = np.full(heights.shape, 1.0)
t0 = time.perf_counter()
kernels.gain_values(heights, ck, ci, cj, ci[:1], cj[:1], 0.02, 1.0, 1.0, 2.0, True)
out["gain_map"] = time.perf_counter() - t0
print(json.dumps(out))
"""


def run_numpy_backend(heights, sensor, repeat, n_cand):
    env = dict(os.environ, KCOVER_BACKEND="numpy")
    spec = json.dumps(
        {
            "heights": heights.tolist(),
            "sensor": list(sensor),
            "repeat": repeat,
            "n_cand": n_cand,
        }
    )
    proc = subprocess.run(
        [sys.executable, "-c", CHILD_SCRIPT],
        input=spec.encode(),
        stdout=subprocess.PIPE,
        env=env,
        check=True,
    )
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="16,32,64")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    from kcover import kernels
    from kcover.datagen import flood_fill_heights, random_building_mask

    kernels.warmup()
    print(f"{'size':>5} {'kernel':<14} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for size in [int(s) for s in args.sizes.split(",")]:
        rng = np.random.default_rng(0)
        mask = random_building_mask(rng, size)
        heights = flood_fill_heights(mask, rng).values
        free = np.argwhere(heights == 0)
        i, j = free[len(free) // 2]
        sensor = (j + 0.5, i + 0.5, heights[i, j] + 0.02)
        # keep the fallback gain map tractable: a handful of candidates
        n_cand = min(8, len(free))

        timings = {}
        t0 = time.perf_counter()
        for _ in range(args.repeat):
            kernels.field_sweep(heights, *sensor, 1.0)
        timings["field_sweep"] = (time.perf_counter() - t0) / args.repeat
        t0 = time.perf_counter()
        for _ in range(args.repeat):
            kernels.field_oracle(heights, *sensor, 1.0)
        timings["field_oracle"] = (time.perf_counter() - t0) / args.repeat
        ci = np.ascontiguousarray(free[:n_cand, 0])
        cj = np.ascontiguousarray(free[:n_cand, 1])
        ck = np.full(heights.shape, 1.0)
        t0 = time.perf_counter()
        kernels.gain_values(heights, ck, ci, cj, ci[:1], cj[:1], 0.02, 1.0, 1.0, 2.0, True)
        timings["gain_map"] = time.perf_counter() - t0

        plain = run_numpy_backend(heights, sensor, max(1, args.repeat // 5), n_cand)
        for name in ("field_sweep", "field_oracle", "gain_map"):
            nb = timings[name]
            py = plain[name]
            print(f"{size:>5} {name:<14} {nb * 1e3:>10.2f}ms {py * 1e3:>10.2f}ms {py / nb:>8.1f}x")


if __name__ == "__main__":
    main()
