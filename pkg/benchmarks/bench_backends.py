"""Benchmark the compiled kernels against the pure-numpy fallback.

Both backends are imported side by side (the env-var switch in
fmax._kernels only picks the default), timed on the same inputs, and
checked for bit-identical outputs while we are at it.

Usage: python3 benchmarks/bench_backends.py [--batches 200,2000,20000] [--m 8]
"""

import argparse
import time

import numpy as np

from fmax._kernels import pure

try:
    from fmax._kernels import _speedups
except ImportError:
    _speedups = None


def _time(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _random_p(rng, b, m):
    p = rng.random((b, m, m + 1))
    p[:, :, 0] = 0.0
    counts = rng.integers(1, m + 1, size=b)
    scale = np.zeros((b, m + 1))
    scale[np.arange(b), counts] = 1.0
    p *= scale[:, None, :]
    p /= np.maximum(p.sum(axis=(1, 2), keepdims=True), 1e-300) / counts[:, None, None]
    return np.ascontiguousarray(np.minimum(p, 1.0))


def _bench_pair(name, fn_c, fn_py, args, report):
    t_py, out_py = _time(fn_py, *args)
    row = [name, f"{t_py * 1e3:9.2f}"]
    if fn_c is not None:
        t_c, out_c = _time(fn_c, *args)
        outs_c = out_c if isinstance(out_c, tuple) else (out_c,)
        outs_py = out_py if isinstance(out_py, tuple) else (out_py,)
        identical = all(
            np.array_equal(np.asarray(a), np.asarray(b))
            for a, b in zip(outs_c, outs_py)
        )
        row += [f"{t_c * 1e3:9.2f}", f"{t_py / t_c:6.1f}x", "yes" if identical else "NO"]
    else:
        row += ["      n/a", "   n/a", "n/a"]
    report.append(row)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batches", default="200,2000,20000",
                    help="comma-separated batch sizes")
    ap.add_argument("--m", type=int, default=8, help="labels per item")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    m = args.m
    rng = np.random.default_rng(args.seed)

    if _speedups is None:
        print("compiled backend unavailable; timing the fallback only\n")

    for b in (int(v) for v in args.batches.split(",")):
        p = _random_p(rng, b, m)
        d = pure.recover_d_batch(p)
        half = m // 2 or 1
        p1, p2 = _random_p(rng, b, half), _random_p(rng, b, m - half or 1)
        d1, d2 = pure.recover_d_batch(p1), pure.recover_d_batch(p2)

        report = []
        pairs = [
            ("delta_batch", "delta_batch", (p,)),
            ("gfm_batch", "gfm_batch", (p, d[:, 0])),
            ("recover_d_batch", "recover_d_batch", (p,)),
            ("merge_batch", "merge_batch", (p1, d1, p2, d2)),
        ]
        for name, attr, a in pairs:
            fn_c = getattr(_speedups, attr) if _speedups is not None else None
            _bench_pair(name, fn_c, getattr(pure, attr), a, report)

        print(f"batch={b} m={m}  (best of 5, milliseconds)")
        print(f"  {'kernel':<16} {'python':>9} {'cython':>9} {'ratio':>7}  bit-identical")
        for row in report:
            print("  " + row[0].ljust(16) + " " + " ".join(row[1:3]) + " " + row[3] + "  " + row[4])
        print()


if __name__ == "__main__":
    main()
