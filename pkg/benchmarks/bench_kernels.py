"""Compare the pure-numpy and compiled kernel backends.

Times the two hot kernels on episode-shaped workloads and prints the
speedup. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--reps 5] [--dim 64]
"""

import argparse
import time

import numpy as np

from cropshot import kernels


def best_of(fn, reps):
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def probe_workload(rng, n, dim, classes):
    X = rng.normal(size=(n, dim))
    y = rng.integers(0, classes, size=n)
    y[:classes] = np.arange(classes)
    w = np.ones(n)
    return X, y, w


def kmeans_workload(rng, queries, dim, classes, per_class):
    centers = rng.normal(size=(classes, dim)) * 2
    sums = centers * per_class + rng.normal(size=(classes, dim))
    counts = np.full(classes, float(per_class))
    labels = rng.integers(0, classes, size=queries)
    query = centers[labels] + rng.normal(size=(queries, dim))
    return sums, counts, query, centers.copy()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--classes", type=int, default=5)
    parser.add_argument("--epochs", type=int, default=500)
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; run pip install -e . first")
    print(f"backends: {', '.join(sorted(backends))} (active: {kernels.BACKEND})")
    rng = np.random.default_rng(0)

    def header(label):
        return f"{label:>6} " + "".join(f"{name:>12}" for name in sorted(backends))

    print(f"\ntrain_linear_head ({args.classes} classes, dim {args.dim}, "
          f"{args.epochs} epochs)")
    print(header("n"))
    for n in (25, 100, 500):
        X, y, w = probe_workload(rng, n, args.dim, args.classes)
        row = [f"{n:>6}"]
        timings = {}
        for name in sorted(backends):
            fn = backends[name].train_linear_head
            timings[name] = best_of(
                lambda: fn(X, y, w, args.classes, 0.1, args.epochs, 1e-4), args.reps
            )
            row.append(f"{timings[name] * 1e3:>10.2f}ms")
        if len(timings) == 2:
            row.append(f"  ({timings['python'] / timings['cython']:.1f}x)")
        print("".join(row))

    print(f"\nsoft_kmeans ({args.classes} centroids, dim {args.dim}, "
          "beta 5, tol 1e-6)")
    print(header("nq"))
    for queries in (45, 200, 1000):
        sums, counts, query, centroids = kmeans_workload(
            rng, queries, args.dim, args.classes, 5
        )
        row = [f"{queries:>6}"]
        timings = {}
        for name in sorted(backends):
            fn = backends[name].soft_kmeans
            timings[name] = best_of(
                lambda: fn(sums, counts, query, centroids, 5.0, 100, 1e-6), args.reps
            )
            row.append(f"{timings[name] * 1e3:>10.2f}ms")
        if len(timings) == 2:
            row.append(f"  ({timings['python'] / timings['cython']:.1f}x)")
        print("".join(row))


if __name__ == "__main__":
    main()
