"""Benchmark: compiled kernels vs the numpy fallback.

Times the individual hot operations and a full training step (forward,
label refresh, gradient accumulation, momentum update) at desk scale and
encoder scale. Run directly:

    python benchmarks/bench_kernels.py [--repeats 200]
"""

import argparse
import time

import numpy as np

from fstcbdg._kernels import _numpy

try:
    from fstcbdg._kernels import _core
except ImportError:
    _core = None

SIZES = [
    ("desk (64x32, K=10)", 64, 32, 10),
    ("wide (64x512, K=10)", 64, 512, 10),
    ("encoder (64x1024, K=10)", 64, 1024, 10),
    ("stress (256x1024, K=100)", 256, 1024, 100),
]


def make_case(rng, n, d, k):
    x = rng.standard_normal((n, d))
    w = rng.standard_normal((k, d))
    b = rng.standard_normal(k)
    q = rng.random((n, k)) + 1e-6
    q /= q.sum(axis=1, keepdims=True)
    y = rng.integers(0, k, size=n)
    return x, w, b, q, y


def time_call(fn, repeats):
    fn()  # warmup
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats * 1e6  # us


def train_step(impl, x, w, b, q, y, mom_w, mom_b):
    probs = impl.linear_probs(x, w, b)
    np.multiply(q, 0.9, out=q)
    q += 0.1 * probs
    gw = np.zeros_like(w)
    gb = np.zeros_like(b)
    impl.add_soft_grads(x, probs, q, gw, gb, 1.0 / x.shape[0])
    impl.add_hard_grads(x, probs, y, gw, gb, 1.0 / x.shape[0])
    impl.momentum_step(w.reshape(-1), mom_w, gw.reshape(-1), 0.01, 0.9, 1e-5)
    impl.momentum_step(b, mom_b, gb, 0.01, 0.9, 1e-5)


def bench_backend(impl, n, d, k, repeats):
    rng = np.random.default_rng(0)
    x, w, b, q, y = make_case(rng, n, d, k)
    probs = impl.linear_probs(x, w, b)
    gw, gb = np.zeros_like(w), np.zeros_like(b)
    mom_w, mom_b = np.zeros(w.size), np.zeros(k)
    return {
        "forward": time_call(lambda: impl.linear_probs(x, w, b), repeats),
        "soft_xent": time_call(lambda: impl.soft_cross_entropy(probs, q), repeats),
        "grads": time_call(
            lambda: impl.add_soft_grads(x, probs, q, gw, gb, 1.0 / n), repeats),
        "momentum": time_call(
            lambda: impl.momentum_step(w.reshape(-1), mom_w, gw.reshape(-1),
                                       0.01, 0.9, 1e-5), repeats),
        "train_step": time_call(
            lambda: train_step(impl, x, w.copy(), b.copy(), q.copy(), y,
                               mom_w.copy(), mom_b.copy()), max(repeats // 4, 1)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if _core is None:
        print("compiled kernels not built; run `pip install -e .` first")

    for label, n, d, k in SIZES:
        print(f"\n{label}  (microseconds per call, {args.repeats} repeats)")
        numpy_times = bench_backend(_numpy, n, d, k, args.repeats)
        core_times = bench_backend(_core, n, d, k, args.repeats) if _core else None
        header = f"{'op':<12}{'numpy':>12}" + (f"{'cython':>12}{'speedup':>10}" if core_times else "")
        print(header)
        for op, t_np in numpy_times.items():
            line = f"{op:<12}{t_np:>10.1f}us"
            if core_times:
                t_cy = core_times[op]
                line += f"{t_cy:>10.1f}us{t_np / t_cy:>9.2f}x"
            print(line)


if __name__ == "__main__":
    main()
