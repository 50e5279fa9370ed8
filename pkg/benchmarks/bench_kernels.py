"""Time the compiled kernels against their uncompiled fallbacks.

The package selects the backend at import time from OBSMATCH_NUMBA; this
script sidesteps the flag and times both paths on the same inputs:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from obsmatch import kernels


def best_of(fn, args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def compiled(fn_impl, **njit_kwargs):
    if not kernels.HAVE_NUMBA:
        return None
    import numba

    return numba.njit(cache=True, **njit_kwargs)(fn_impl)


def lda_args(n_docs=200, doc_len=40, vocab=120, topics=8, sweeps=30, seed=1):
    rng = np.random.default_rng(seed)
    words = rng.integers(0, vocab, n_docs * doc_len).astype(np.int64)
    doc_ids = np.repeat(np.arange(n_docs, dtype=np.int64), doc_len)
    return (words, doc_ids, n_docs, vocab, topics, 0.4, 0.1, sweeps, 7)


def lasso_args(n=4000, p=10, seed=2):
    rng = np.random.default_rng(seed)
    X = np.asfortranarray(rng.standard_normal((n, p)))
    y = (X @ rng.standard_normal(p) + rng.standard_normal(n) > 0).astype(float)
    return (X, y, 0.01, 1e-7, 500, 0.0, np.zeros(p))


def scan_args(nt=5000, nc=5000, d=6, seed=3):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal((nt, d)), rng.standard_normal((nc, d)))


def main():
    if not kernels.USE_NUMBA:
        raise SystemExit(
            "run the benchmark without OBSMATCH_NUMBA=0; it compiles the "
            "kernels itself and times both paths"
        )
    rows = []
    benches = [
        ("lda_gibbs_fit", kernels._lda_gibbs_fit_impl, lda_args(), {}),
        ("lasso_cd", kernels._lasso_cd_impl, lasso_args(), {}),
        ("nearest_scan", kernels._nearest_scan_loop_impl, scan_args(),
         {"parallel": True}),
    ]
    for name, impl, args, njit_kwargs in benches:
        jit_fn = compiled(impl, **njit_kwargs)
        jit_time = None
        if jit_fn is not None:
            jit_fn(*args)  # compile outside the timed region
            jit_time = best_of(jit_fn, args)
        if name == "nearest_scan":
            # the shipped fallback for the scan is the vectorized version
            fallback_time = best_of(kernels.nearest_scan_numpy, args)
        else:
            fallback_time = best_of(impl, args, repeats=1)
        rows.append((name, jit_time, fallback_time))

    print(f"{'kernel':<16}{'numba':>12}{'fallback':>12}{'speedup':>10}")
    for name, jit_time, fallback_time in rows:
        if jit_time is None:
            print(f"{name:<16}{'n/a':>12}{fallback_time:>11.4f}s{'':>10}")
        else:
            print(
                f"{name:<16}{jit_time:>11.4f}s{fallback_time:>11.4f}s"
                f"{fallback_time / jit_time:>9.1f}x"
            )


if __name__ == "__main__":
    main()
