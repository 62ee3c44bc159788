"""Compiled vs numpy scan throughput.

    python3 benchmarks/bench_topk.py [--rows 310000] [--queries 200] [--threads N]

Both backends must return identical results; the script checks that
before reporting timings.
"""

import argparse
import os
import time

import numpy as np

from vocabembed import kernels


def timed(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=310_000)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    protos = rng.standard_normal((args.rows, args.dim))
    queries = rng.standard_normal((args.queries, args.dim))
    ids = np.arange(args.rows)
    results = {}
    for backend in kernels.available_backends():
        threads = args.threads if backend == "compiled" else 1
        t, out = timed(lambda: kernels.topk_sqdist(queries, protos, ids, args.k, threads=threads,
                                                   backend=backend), args.repeats)
        results[backend] = (t, out)
        rate = args.queries * args.rows / t / 1e6
        print(f"{backend:9s} threads={threads:<3d} {t:8.3f} s  {rate:8.1f} M distances/s")
    if len(results) == 2:
        (tc, oc), (tp, op) = results["compiled"], results["python"]
        assert all(np.array_equal(a, b) for a, b in zip(oc, op)), "backends disagree"
        print(f"speedup   {tp / tc:.2f}x (results identical)")


if __name__ == "__main__":
    main()
