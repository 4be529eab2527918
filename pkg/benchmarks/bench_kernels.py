"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints the best wall time of each kernel on both backends and the speedup.
The outputs of the two backends are also checked for bit-identity.
"""
import argparse
import time

import numpy as np

from randbell import _fallback

try:
    from randbell import _kernels
except ImportError:
    _kernels = None


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def cases():
    rng = np.random.default_rng(0)
    return {
        "uniform_block 2^18 x 6": lambda k: k.uniform_block(1, 0, 1 << 18, 0, 6),
        "uniform_block 2^15 x 32": lambda k: k.uniform_block(1, 0, 1 << 15, 0, 32),
        "chsh_max 2^17 x 3x3": (lambda E: lambda k: k.chsh_max_batch(E))(rng.uniform(-1, 1, (1 << 17, 3, 3))),
        "chsh_max 2^14 x 5x5": (lambda E: lambda k: k.chsh_max_batch(E))(rng.uniform(-1, 1, (1 << 14, 5, 5))),
        "chsh_max 2^11 x 8x8": (lambda E: lambda k: k.chsh_max_batch(E))(rng.uniform(-1, 1, (1 << 11, 8, 8))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':26s} {'python':>10s} {'cython':>10s} {'speedup':>8s}  identical")
    for name, run in cases().items():
        t_py, out_py = best_time(lambda: run(_fallback), args.repeat)
        if _kernels is None:
            print(f"{name:26s} {t_py:10.4f}")
            continue
        t_cy, out_cy = best_time(lambda: run(_kernels), args.repeat)
        if isinstance(out_py, tuple):
            same = all(np.array_equal(a, b) for a, b in zip(out_py, out_cy))
        else:
            same = np.array_equal(out_py, out_cy)
        print(f"{name:26s} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:7.1f}x  {same}")


if __name__ == "__main__":
    main()
