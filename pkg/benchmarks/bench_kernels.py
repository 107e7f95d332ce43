"""Compiled vs numpy kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the best-of-N time per call for each backend and the speedup. The
compiled rows are skipped when the extension is not built.
"""

import argparse
import timeit

import numpy as np

from dloplace import _kernels_py

try:
    from dloplace import _kernels as _compiled
except ImportError:
    _compiled = None


def cases():
    s = np.linspace(0.0, 0.3, 200)
    big = np.linspace(0.0, 0.3, 5000)
    t = np.linspace(0.0, 4 * np.pi, 400)
    spiral = (0.05 + 0.01 * t) * np.cos(t), (0.05 + 0.01 * t) * np.sin(t)
    ln = np.linspace(0.0, 1.0, 2000)
    return [
        ("am_zeta (400 pts)", lambda m: m.am_zeta(np.linspace(-3, 3, 400), 0.7)),
        ("ellipe_inc (400 pts)", lambda m: m.ellipe_inc(np.linspace(-1.5, 1.5, 400), 0.7, 1.2763499431699064)),
        ("elastica_states (200)", lambda m: m.elastica_states(s, 0.6, 0.15, 0.6, 0.0, 0.1, -0.4)),
        ("elastica_states (5000)", lambda m: m.elastica_states(big, 0.6, 0.15, 0.6, 0.0, 0.1, -0.4)),
        ("rk4_states (200 x 50)", lambda m: m.rk4_states(s, 0.6, 0.15, 0.6, 0.0, 0.1, -0.4, 50)),
        ("adjoint_rk4 (200 x 20)", lambda m: m.adjoint_rk4(s, 0.6, 0.15, 0.6, -0.4, 1.0, 0.5, 0.2, 20)),
        ("first_crossing spiral (400)", lambda m: m.first_crossing(*spiral)),
        ("first_crossing line (2000)", lambda m: m.first_crossing(ln, 0.1 * ln)),
    ]


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':30s} {'numpy':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, call in cases():
        tp = best_time(lambda: call(_kernels_py), args.repeat)
        if _compiled is None:
            print(f"{name:30s} {tp * 1e6:10.1f}us {'n/a':>12s}")
            continue
        tc = best_time(lambda: call(_compiled), args.repeat)
        print(f"{name:30s} {tp * 1e6:10.1f}us {tc * 1e6:10.1f}us {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
