"""Benchmark: compiled event-loop kernel vs the pure-Python fallback.

Both backends consume the identical uniform stream and produce
bit-identical trajectories; this script measures the throughput gap.

Usage: python3 bench/benchmark_kernel.py [--events N] [--L L] [--seed S]
"""
import argparse
import time

import numpy as np

from iplab.kernel import HAVE_COMPILED, make_kernel


def run(backend, occ, d, seed, events):
    k = make_kernel(occ, d, np.random.default_rng(seed), backend=backend)
    t0 = time.perf_counter()
    for _ in range(events):
        k.step()
    dt = time.perf_counter() - t0
    return dt, k.time, np.asarray(k.occupations)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--L", type=int, default=1024)
    ap.add_argument("--d", type=float, default=1 / 32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    occ = rng.integers(0, 4, size=args.L)
    occ[0] += 1

    results = {}
    backends = ["python"] + (["cython"] if HAVE_COMPILED else [])
    for backend in backends:
        dt, clock, final = run(backend, occ, args.d, args.seed, args.events)
        results[backend] = (dt, clock, final)
        print(f"{backend:>8}: {args.events / dt / 1e6:7.3f} M events/s "
              f"({dt:.3f} s for {args.events} events)")

    if HAVE_COMPILED:
        dp, cp, fp = results["python"]
        dc, cc, fc = results["cython"]
        identical = (cp == cc) and np.array_equal(fp, fc)
        print(f"speedup: {dp / dc:.1f}x, trajectories bit-identical: {identical}")
        if not identical:
            raise SystemExit("backend mismatch: trajectories diverged")
    else:
        print("compiled kernel unavailable; python backend only")


if __name__ == "__main__":
    main()
