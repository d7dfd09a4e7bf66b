"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_backends.py [--repeat 3]

Each kernel runs on identical inputs under both backends; outputs are
checked for equality before timings are reported.
"""

import argparse
import time

import numpy as np

from sbmtest.graph import ModelParams, sample_er
from sbmtest.kernels import _numba, _numpy
from sbmtest.rng import stream


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases():
    g20 = sample_er(ModelParams(4.6, 0.4, 20), stream(1))
    g200 = sample_er(ModelParams(6.0, 2.0, 200), stream(2))
    g40 = sample_er(ModelParams(4.0, 1.0, 40), stream(3))
    key = np.uint64(12345)
    x0 = np.random.default_rng(0).standard_normal(g200.n) + 1
    p = 2 * g200.num_edges / (g200.n * (g200.n - 1))
    yield "mc_histogram n=20 M=2e6", lambda b: b.mc_histogram(g20.eu, g20.ev, 20, key, 0, 2_000_000)
    yield "enum_histogram k=20", lambda b: b.enum_histogram(
        g20.eu, g20.ev, g20.indptr, g20.indices, 20, 0, 1 << 19
    )
    yield "count_cycles m=6 n=40", lambda b: b.count_cycles(g40.indptr, g40.indices, 40, 6)
    yield "power_iteration n=200", lambda b: b.power_iteration(
        g200.eu, g200.ev, g200.n, p, x0, 1e-10, 2_000_000
    )[0]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    print(f"{'kernel':28s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, fn in cases():
        fn(_numba)  # compile outside the timing
        t_nb, out_nb = best_of(lambda: fn(_numba), args.repeat)
        t_np, out_np = best_of(lambda: fn(_numpy), args.repeat)
        same = np.allclose(out_nb, out_np, rtol=1e-9, atol=1e-9)
        flag = "" if same else "  OUTPUT MISMATCH"
        print(f"{name:28s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}{flag}")


if __name__ == "__main__":
    main()
