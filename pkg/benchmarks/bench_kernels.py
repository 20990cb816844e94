"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under every importable backend; the
script also checks that the outputs agree exactly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from krigaug.kernels import available_backends


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def cases(rng):
    n = 400
    x, y = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
    v = rng.normal(size=n)
    edges = np.linspace(0.05, 0.7, 15)
    X = rng.normal(size=(2000, 3))
    lab = X @ np.array([1.0, -2.0, 0.5]) + np.sin(3 * X[:, 0]) + rng.normal(scale=0.3, size=2000)
    w = np.bincount(rng.integers(0, 2000, 2000), minlength=2000).astype(float)
    return {
        "pair_bin_sums (400 pts)": lambda k: k.pair_bin_sums(x, y, v, edges),
        "build_tree (2000 rows)": lambda k: k.build_tree(X, lab, w, 12, 2, 2, 12345),
    }, (X, lab, w)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy fallback only")
    rng = np.random.default_rng(0)
    table, (X, lab, w) = cases(rng)

    ref = backends["python"]
    trees = [ref.build_tree(X, lab, w, 12, 2, 2, s) for s in range(50)]
    offsets = np.cumsum([0] + [t[0].shape[0] for t in trees]).astype(np.int64)
    packed = [np.concatenate([t[i] for t in trees]) for i in range(5)]
    table["predict_forest (50 trees x 2000)"] = lambda k: k.predict_forest(*packed, offsets, X)

    names = list(backends)
    print(f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in table.items():
        times, outs = [], []
        for n in names:
            t, out = _time(lambda: fn(backends[n]), args.repeat)
            times.append(t)
            outs.append(out)
        line = f"{label:34s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(names) > 1:
            line += f"{times[0] / times[1]:11.1f}x"
            if not _same(outs[0], outs[1]):
                line += "  MISMATCH"
        print(line)


if __name__ == "__main__":
    main()
