"""Time the classifier kernels: numba @njit vs the pure-numpy fallback.

The workload mirrors a bootstrap-augmented training set, where the
feature-line scan is quadratic in exemplars per query and threshold
calibration multiplies that by the training count.

Run:  python benchmarks/bench_kernels.py [n_exemplars] [dim]
"""

import sys
import time

import numpy as np

from ecogcar import _kernels

if _kernels.numba_impls is None:
    sys.exit("numba unavailable; nothing to compare")


def timeit(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 600
    dim = int(sys.argv[2]) if len(sys.argv) > 2 else 56
    rng = np.random.default_rng(0)
    X = rng.normal(size=(n, dim))
    q = rng.normal(size=dim)
    class_points = X[: n // 3]  # one class's share of the exemplars

    cases = [
        ("nn_scan (1 query)", "nn_scan", (X, q)),
        ("loo_nn_sq_distances", "loo_nn_sq_distances", (X,)),
        ("nfl_scan (1 query, 1 class)", "nfl_scan", (class_points, q, -1)),
    ]

    print(f"exemplars={n} dim={dim}")
    print(f"{'kernel':<30} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for label, name, args in cases:
        nb = _kernels.numba_impls[name]
        py = _kernels.numpy_impls[name]
        nb(*args)  # trigger compilation outside the timed region
        t_py = timeit(py, *args)
        t_nb = timeit(nb, *args)
        print(f"{label:<30} {t_py * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_py / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
