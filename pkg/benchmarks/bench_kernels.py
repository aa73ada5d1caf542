"""Compare the compiled kernels with the pure-NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5] [--out results.csv]
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from hvkit import _fallback

try:
    from hvkit import _kernels
except ImportError:
    _kernels = None


def _front(m_dim: int, n: int, rng) -> np.ndarray:
    """Rows of one non-dominated set of size ``n`` (points on the unit sphere)."""
    pts = np.abs(rng.normal(size=(n, m_dim)))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return np.ascontiguousarray(pts)


def cases(rng):
    for m_dim, n in ((3, 100), (5, 100), (8, 50)):
        pts = _front(m_dim, n, rng)
        yield f"hv_sweep M={m_dim} N={n}", "hv_sweep", (pts,)
    for m_dim, n in ((3, 100), (5, 50)):
        pts = _front(m_dim, n, rng)
        yield f"contributions M={m_dim} N={n}", "contributions", (pts,)
    for m_dim in (3, 8):
        pts = np.ascontiguousarray(rng.random((1000, m_dim)))
        yield f"nd_ranks M={m_dim} N=1000", "nd_ranks", (pts,)
    pts = _front(5, 50, rng)
    samples = np.ascontiguousarray(rng.random((10_000, 5)))
    yield "mc_count M=5 N=50 samples=10000", "mc_count", (pts, samples)


def best_of(fn, args, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="also write the table as CSV")
    args = p.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; run `pip install -e .` first", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    rows = []
    for label, name, fargs in cases(rng):
        fast = getattr(_kernels, name)(*fargs)
        slow = getattr(_fallback, name)(*fargs)
        if not np.allclose(fast, slow, rtol=1e-9, atol=0):
            print(f"{label}: backends disagree", file=sys.stderr)
            return 1
        t_fast = best_of(getattr(_kernels, name), fargs, args.repeats)
        t_slow = best_of(getattr(_fallback, name), fargs, args.repeats)
        rows.append((label, t_fast, t_slow, t_slow / t_fast))
    print(f"{'case':36s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for label, tf, ts, sp in rows:
        print(f"{label:36s} {tf * 1e3:10.3f} {ts * 1e3:10.3f} {sp:8.1f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "cython_seconds", "python_seconds", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
