"""Compare the compiled core against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json] [--skip-e2e]

Kernel timings call both implementations in one process; the end-to-end timing
runs one window clustering in a subprocess per backend, since the backend is
chosen at import.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from dnsjack import kernels


def kernel_cases(rng):
    X = rng.normal(size=(2000, 30))
    C = rng.normal(size=(16, 30))
    labels = rng.integers(0, 16, 2000)
    n = 3000
    src = rng.integers(0, n, 4 * n)
    dst = rng.integers(0, n, 4 * n)
    pairs = np.unique(np.concatenate([np.stack([src, dst], 1), np.stack([dst, src], 1)]), axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    indptr = np.concatenate([[0], np.cumsum(np.bincount(pairs[:, 0], minlength=n))])
    values = np.sort(rng.normal(size=5000))
    y = rng.integers(0, 2, 5000)
    return {
        "assign_nearest 2000x30, k=16": lambda impl: kernels.assign_nearest(X, C, impl=impl),
        "cluster_distance_sums 2000x30, k=16": lambda impl: kernels.cluster_distance_sums(X, labels, 16, impl=impl),
        "eccentricities 3000 nodes, 64 sources": lambda impl: kernels.eccentricities(
            indptr, pairs[:, 1], np.arange(64), impl=impl),
        "split_scan 5000 rows, gini": lambda impl: kernels.split_scan(values, y, 2, 13, kernels.GINI, impl=impl),
    }


E2E = """
import time, numpy as np
from dnsjack import kernels
from dnsjack.ml import select_k, standardize
X = standardize(np.random.default_rng(0).normal(size=(2000, 30)))
t = time.perf_counter()
select_k(X, (7, 12), 0)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def end_to_end():
    out = {}
    for name, env in (("compiled", {}), ("python", {"DNSJACK_PURE_PYTHON": "1"})):
        proc = subprocess.run([sys.executable, "-c", E2E], env={**os.environ, **env},
                              capture_output=True, text=True, check=True)
        backend, seconds = proc.stdout.split()
        out[backend] = float(seconds)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    if "compiled" not in impls:
        sys.exit("compiled core is not built; run `pip install -e . --no-build-isolation` first")
    results = {}
    print(f"{'kernel':42s} {'python (ms)':>12s} {'compiled (ms)':>14s} {'speedup':>8s}")
    for label, fn in kernel_cases(np.random.default_rng(0)).items():
        row = {}
        for name in ("python", "compiled"):
            fn(impls[name])
            row[name] = min(timeit.repeat(lambda: fn(impls[name]), number=1, repeat=args.repeat)) * 1e3
        results[label] = row
        print(f"{label:42s} {row['python']:12.2f} {row['compiled']:14.2f} {row['python'] / row['compiled']:7.1f}x")
    if not args.skip_e2e:
        e2e = end_to_end()
        results["select_k 2000x30, k=7..12"] = {k: v * 1e3 for k, v in e2e.items()}
        print(f"{'select_k 2000x30, k=7..12 (end to end)':42s} {e2e['python'] * 1e3:12.0f} "
              f"{e2e['compiled'] * 1e3:14.0f} {e2e['python'] / e2e['compiled']:7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
