"""Compare the compiled kernels with the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from gaborkit import _kernels_py, kernels

try:
    from gaborkit import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    R = rng.uniform(0.1, 2.0, 200_000)
    kappa = rng.uniform(-300, 300, 200_000)
    lo = rng.uniform(-1, 0, (100_000, 2))
    hi = lo + rng.uniform(0, 1, (100_000, 2))
    nu = rng.uniform(-50, 50, (100_000, 2))
    t = rng.uniform(-1, 1, (100_000, 2))
    f = np.array([-0.25, -0.25]), np.array([0.25, 0.25])
    g = np.array([-0.5, -0.5]), np.array([0.5, 0.5])
    pts = rng.uniform(0, 40, (200_000, 4))
    lows = rng.uniform(0, 20, (200, 4))
    return {
        "radial_moments": lambda impl: kernels.radial_moments(R, kappa, 2, impl=impl),
        "box_transform": lambda impl: kernels.box_transform(lo, hi, nu, impl=impl),
        "box_stft_sq_sum": lambda impl: kernels.box_stft_sq_sum(*f, *g, t, nu, impl=impl),
        "count_in_boxes": lambda impl: kernels.count_in_boxes(pts, lows, 10.0, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<18}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, run in cases(np.random.default_rng(0)).items():
        py = min(timeit.repeat(lambda: run(_kernels_py), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{name:<18}{py * 1e3:>14.2f}{'-':>16}{'-':>10}")
            continue
        c = min(timeit.repeat(lambda: run(_kernels), number=1, repeat=args.repeat))
        print(f"{name:<18}{py * 1e3:>14.2f}{c * 1e3:>16.2f}{py / c:>9.1f}x")


if __name__ == "__main__":
    main()
