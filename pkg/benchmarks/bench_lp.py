"""Benchmark the simplex pivot kernels: compiled extension vs numpy fallback.

Times the bounded-Lipschitz seminorm LP over batches of random instances at
several support sizes and prints per-solve times plus the speedup.  Run as

    python benchmarks/bench_lp.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from kantorovich_lab.transport import _lpcore_py
from kantorovich_lab.transport._simplex import simplex_max

try:
    from kantorovich_lab.transport import _lpcore as _compiled
except ImportError:
    _compiled = None


def metric_closure(raw):
    d = raw.copy()
    np.fill_diagonal(d, 0.0)
    for k in range(d.shape[0]):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def bounded_potential_lp(rng, n):
    raw = rng.uniform(0.1, 4.0, size=(n, n))
    d = metric_closure((raw + raw.T) / 2)
    w = rng.uniform(-2, 2, size=n)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    A = np.zeros((len(pairs) + n, n))
    b = np.empty(len(pairs) + n)
    for row, (i, j) in enumerate(pairs):
        A[row, i] = 1.0
        A[row, j] = -1.0
        b[row] = d[i, j]
    for i in range(n):
        A[len(pairs) + i, i] = 1.0
        b[len(pairs) + i] = 2.0
    return A, b, w


def time_kernel(kernel, instances, repeats):
    best = float("inf")
    value_sum = 0.0
    for _ in range(repeats):
        started = time.perf_counter()
        value_sum = 0.0
        for A, b, c in instances:
            value_sum += simplex_max(A, b, c, kernel=kernel).value
        best = min(best, time.perf_counter() - started)
    return best, value_sum


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--batch", type=int, default=50)
    args = parser.parse_args()

    rng = np.random.default_rng(7)
    print(f"{'atoms':>6} {'batch':>6} {'python':>12} {'compiled':>12} {'speedup':>8}")
    for n in (4, 8, 16, 24, 32):
        instances = [bounded_potential_lp(rng, n) for _ in range(args.batch)]
        t_py, v_py = time_kernel(_lpcore_py.pivot_loop, instances, args.repeats)
        row = f"{n:>6} {args.batch:>6} {t_py / args.batch * 1e3:>10.3f}ms"
        if _compiled is not None:
            t_c, v_c = time_kernel(_compiled.pivot_loop, instances, args.repeats)
            assert v_c == v_py, "kernels disagree"
            row += f" {t_c / args.batch * 1e3:>10.3f}ms {t_py / t_c:>7.1f}x"
        else:
            row += f" {'absent':>12} {'-':>8}"
        print(row)
    if _compiled is None:
        print("compiled kernel not built; rebuild with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
