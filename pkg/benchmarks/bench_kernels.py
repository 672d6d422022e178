"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-repeat wall time per call for each kernel and the
speed-up. The compiled column is skipped when the extension is not built.
"""

import argparse
import timeit

import numpy as np

from geoaug import _backend


def _masses(rng, *shape):
    m = rng.uniform(0.05, 1.0, shape)
    return m / m.sum(axis=-1, keepdims=True)


def cases(rng):
    ma, mb = _masses(rng, 50), _masses(rng, 50)
    a3, b3 = _masses(rng, 32, 12, 50), _masses(rng, 32, 12, 50)
    w = np.ones(12)
    cost = rng.uniform(0.0, 1.0, (64, 64))
    ua, ub = np.full(64, 1 / 64), np.full(64, 1 / 64)
    return {
        "w2_cells (G=50)": lambda k: k.w2_cells(ma, mb),
        "pairwise_w2 (32x32 beats, 12 leads)": lambda k: k.pairwise_w2(a3, b3, w, 0, 32),
        "sinkhorn_log (64x64, lam=0.05)": lambda k: k.sinkhorn_log(cost, ua, ub, 0.05, 1e-9, 10_000, 10),
    }


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.2:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"active backend: {_backend.BACKEND}")
    print(f"{'kernel':<40}{'numpy':>12}{'compiled':>12}{'speed-up':>10}")
    for name, call in cases(rng).items():
        slow = best_time(lambda: call(_backend.fallback), args.repeat)
        if _backend.compiled is None:
            print(f"{name:<40}{slow * 1e3:>10.3f}ms{'n/a':>12}{'':>10}")
            continue
        fast = best_time(lambda: call(_backend.compiled), args.repeat)
        print(f"{name:<40}{slow * 1e3:>10.3f}ms{fast * 1e3:>10.3f}ms{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
