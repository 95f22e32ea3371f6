"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat R] [--N 20 40 80]

Prints one row per (kernel, N) with the best-of-R time for each backend
and the speedup.  Both backends are checked for agreement first.
"""
import argparse
import timeit

import numpy as np

from tispde import kernels
from tispde.hermite import gauss_hermite_rule
from tispde.operators import default_order


def cases(N):
    rule = gauss_hermite_rule(default_order(N))
    rng = np.random.default_rng(N)
    coeffs = rng.standard_normal(N + 1)
    t = np.linspace(-8.0, 8.0, 2001)
    return {
        "hermite_table": lambda: kernels.hermite_table(N, t),
        "translate_1d": lambda: kernels.translate_1d(coeffs, 0.7, rule.nodes, rule.scaled_weights),
    }


def best_time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    ap.add_argument("--N", type=int, nargs="+", default=[20, 40, 80])
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the python backend is available")
    print(f"{'kernel':<14} {'N':>4} " + " ".join(f"{b + ' [us]':>14}" for b in backends) + f" {'speedup':>8}")
    for N in args.N:
        for name, fn in cases(N).items():
            results, times = {}, {}
            for b in backends:
                with kernels.use_backend(b):
                    results[b] = fn()
                    times[b] = best_time(fn, args.repeat, args.number)
            ref = results["python"]
            for b in backends:
                np.testing.assert_allclose(results[b], ref, rtol=1e-12, atol=1e-13)
            speed = times["python"] / times["cython"] if "cython" in times else 1.0
            cells = " ".join(f"{1e6 * times[b]:>14.1f}" for b in backends)
            print(f"{name:<14} {N:>4} {cells} {speed:>8.2f}")


if __name__ == "__main__":
    main()
