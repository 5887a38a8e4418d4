"""Benchmark the compiled kernels against the NumPy fallback.

Runs each hot kernel on training- and retrieval-shaped inputs with both
backends and prints a timing table, then times one end-to-end CSLS index
build per backend.  Usage:

    python benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import time

import numpy as np

from bilex._kernels import _numpyops

try:
    from bilex._kernels import _fastops
except ImportError:
    _fastops = None


def timeit(fn, repeat):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel(name, make_args, numpy_fn, fast_fn, repeat):
    args = make_args()
    t_np = timeit(lambda: numpy_fn(*args), repeat)
    if fast_fn is None:
        print(f"{name:38s} numpy {t_np * 1e3:8.3f} ms   cython  (unavailable)")
        return
    t_cy = timeit(lambda: fast_fn(*args), repeat)
    print(f"{name:38s} numpy {t_np * 1e3:8.3f} ms   cython {t_cy * 1e3:8.3f} ms"
          f"   speedup {t_np / t_cy:5.2f}x")


def csls_build(mapped, tgt, topk_mean_impl, k=10, chunk=1024):
    out = np.empty(len(mapped))
    for start in range(0, len(mapped), chunk):
        sims = mapped[start:start + chunk] @ tgt.T
        out[start:start + chunk] = topk_mean_impl(sims, k)
    return out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"compiled extension available: {_fastops is not None}\n")

    scores_small = rng.standard_normal((3000, 3000))
    bench_kernel(
        "topk_mean 3000x3000 k=10 (CSLS)",
        lambda: (scores_small, 10),
        _numpyops.topk_mean,
        _fastops.topk_mean if _fastops else None,
        args.repeat)

    scores_wide = rng.standard_normal((512, 50000))
    bench_kernel(
        "topk_mean 512x50000 k=10 (chunked)",
        lambda: (scores_wide, 10),
        _numpyops.topk_mean,
        _fastops.topk_mean if _fastops else None,
        args.repeat)

    acts = rng.standard_normal(32 * 2048)
    bench_kernel(
        "leaky_relu 32x2048 (disc hidden)",
        lambda: (acts, 0.2),
        _numpyops.leaky_relu,
        _fastops.leaky_relu if _fastops else None,
        args.repeat)
    bench_kernel(
        "leaky_relu_grad 32x2048",
        lambda: (acts, 0.2),
        _numpyops.leaky_relu_grad,
        _fastops.leaky_relu_grad if _fastops else None,
        args.repeat)

    # end-to-end CSLS penalty pass (matmul via BLAS in both backends)
    mapped = rng.standard_normal((4000, 60))
    tgt = rng.standard_normal((4000, 60))
    t_np = timeit(lambda: csls_build(mapped, tgt, _numpyops.topk_mean), args.repeat)
    line = f"\nCSLS penalty pass 4000x4000:           numpy {t_np * 1e3:8.3f} ms"
    if _fastops is not None:
        t_cy = timeit(lambda: csls_build(mapped, tgt, _fastops.topk_mean),
                      args.repeat)
        line += f"   cython {t_cy * 1e3:8.3f} ms   speedup {t_np / t_cy:5.2f}x"
    print(line)


if __name__ == "__main__":
    main()
