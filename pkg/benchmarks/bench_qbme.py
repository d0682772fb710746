"""Time the collision operator with the compiled and the pure-Python kernel.

    python benchmarks/bench_qbme.py [--repeat 3]

Prints one line per case with the best wall time of each backend, the
speed-up and the largest difference between the two results.
"""

import argparse
import time

import numpy as np

from kinex import Kernel, MassLaw, experiments, kinetic
from kinex._backend import available

CASES = [
    # (n, M_max, N_v, n_omega)
    (1, 3, 32, 1),
    (2, 2, 12, 8),
    (2, 2, 16, 16),
    (3, 2, 6, 16),
]


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = available()
    print(f"backends available: {', '.join(backends)}")
    print(f"{'case':<28}{'python [s]':>12}{'cython [s]':>12}{'speed-up':>10}{'max diff':>12}")
    for n, M, N_v, n_omega in CASES:
        law = MassLaw.family(M, a=0.3, n=n)
        grid = kinetic.VelocityGrid(n, 5.0, N_v)
        st = experiments.random_positive_f(law, grid, seed=0)
        kern = Kernel("power_law", 1.0, 0.5)
        label = f"n={n} M={M} N_v={N_v} K={n_omega}"
        tp, qp = best_of(lambda: kinetic.q_bme(st, kern, n_omega, backend="python"), args.repeat)
        if "cython" in backends:
            tc, qc = best_of(lambda: kinetic.q_bme(st, kern, n_omega, backend="cython"), args.repeat)
            diff = float(np.max(np.abs(qp - qc)) / np.max(np.abs(qp)))
            print(f"{label:<28}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.1f}{diff:>12.1e}")
        else:
            print(f"{label:<28}{tp:>12.4f}{'-':>12}{'-':>10}{'-':>12}")


if __name__ == "__main__":
    main()
