"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from fscil_gacc import kernels


def best_of(fn, args, repeat):
    fn(*args)  # warm-up (triggers compilation for the numba path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    n = 200
    tri = np.tril(rng.uniform(0, 100, (n, n)))
    tri[np.triu_indices(n, 1)] = np.nan
    alphas = np.linspace(0, 1, 1201)
    return {
        "gacc_values": (tri, 12.0, alphas),
        "trapezoid_rows": (rng.uniform(0, 100, (n, 1201)),),
        "ir_pairwise": (rng.standard_normal((256, 64)), rng.standard_normal((256, 64))),
        "cosine_argmax": (rng.standard_normal((100, 64)), rng.standard_normal((5000, 64))),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, inputs in cases(rng).items():
        t_np = best_of(getattr(kernels, name + "_numpy"), inputs, args.repeat)
        fn_nb = getattr(kernels, name + "_numba")
        if fn_nb is None:
            print(f"{name:<16}{t_np * 1e3:>12.3f}{'n/a':>12}{'':>10}")
            continue
        t_nb = best_of(fn_nb, inputs, args.repeat)
        print(f"{name:<16}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
