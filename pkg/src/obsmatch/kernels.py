"""Hot numeric kernels with a numba-compiled default and a numpy fallback.

Set ``OBSMATCH_NUMBA=0`` in the environment to skip JIT compilation: the
Gibbs sampler then runs uncompiled (same source) and the nearest-control
scan falls back to a vectorized matmul implementation.
``benchmarks/bench_kernels.py`` times both paths; the compiled sampler is
hundreds of times faster, while the compiled scan roughly matches the
matmul version but avoids materializing the full similarity matrix. The
coordinate-descent kernel is intentionally left uncompiled: its inner work
is already vectorized numpy, which measures faster than the jitted version.

Randomness inside the samplers uses an explicit Wichmann-Hill composite
generator: its integer products stay far below 2**63, so compiled and
interpreted arithmetic agree exactly (signed overflow is undefined under
the JIT) and results are bitwise reproducible for a given seed on either
backend.
"""

import os

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


USE_NUMBA = HAVE_NUMBA and os.environ.get("OBSMATCH_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "off",
)

# Wichmann-Hill (AS 183): three small multiplicative generators combined;
# period ~6.95e12, every intermediate product well inside int64 range.
_WH_M1 = 30269
_WH_M2 = 30307
_WH_M3 = 30323


def _wh_next_impl(s1, s2, s3):
    s1 = (171 * s1) % _WH_M1
    s2 = (172 * s2) % _WH_M2
    s3 = (170 * s3) % _WH_M3
    u = (s1 / _WH_M1 + s2 / _WH_M2 + s3 / _WH_M3) % 1.0
    return s1, s2, s3, u


def _wh_seed_impl(seed):
    s = seed & 0x7FFFFFFF
    s1 = s % (_WH_M1 - 1) + 1
    s2 = (s // (_WH_M1 - 1)) % (_WH_M2 - 1) + 1
    s3 = (s // ((_WH_M1 - 1) * (_WH_M2 - 1))) % (_WH_M3 - 1) + 1
    for _ in range(16):  # decorrelate nearby seeds
        s1, s2, s3, _ = _wh_next(s1, s2, s3)
    return s1, s2, s3


def _lda_gibbs_fit_impl(words, doc_ids, n_docs, vocab_size, n_topics,
                        alpha, beta, n_sweeps, seed):
    """Collapsed Gibbs sampler for topic assignment counts.

    words/doc_ids are parallel int64 arrays over all token positions.
    Returns (doc_topic, topic_word, topic_total) count matrices.
    """
    n_tokens = words.shape[0]
    ndk = np.zeros((n_docs, n_topics), np.int64)
    nkw = np.zeros((n_topics, vocab_size), np.int64)
    nk = np.zeros(n_topics, np.int64)
    z = np.empty(n_tokens, np.int64)

    s1, s2, s3 = _wh_seed(seed)
    for t in range(n_tokens):
        s1, s2, s3, u = _wh_next(s1, s2, s3)
        k = int(u * n_topics)
        if k >= n_topics:
            k = n_topics - 1
        z[t] = k
        ndk[doc_ids[t], k] += 1
        nkw[k, words[t]] += 1
        nk[k] += 1

    cum = np.empty(n_topics, np.float64)
    vbeta = vocab_size * beta
    for _ in range(n_sweeps):
        for t in range(n_tokens):
            d = doc_ids[t]
            w = words[t]
            k = z[t]
            ndk[d, k] -= 1
            nkw[k, w] -= 1
            nk[k] -= 1
            total = 0.0
            for kk in range(n_topics):
                total += (ndk[d, kk] + alpha) * (nkw[kk, w] + beta) / (nk[kk] + vbeta)
                cum[kk] = total
            s1, s2, s3, u = _wh_next(s1, s2, s3)
            u *= total
            knew = 0
            while knew < n_topics - 1 and cum[knew] < u:
                knew += 1
            z[t] = knew
            ndk[d, knew] += 1
            nkw[knew, w] += 1
            nk[knew] += 1
    return ndk, nkw, nk


def _lda_gibbs_infer_impl(words, topic_word, alpha, n_sweeps, seed):
    """Fold a single document into a fixed topic-word matrix.

    Returns the per-topic assignment counts after the final sweep.
    """
    n_tokens = words.shape[0]
    n_topics = topic_word.shape[0]
    counts = np.zeros(n_topics, np.int64)
    z = np.empty(n_tokens, np.int64)

    s1, s2, s3 = _wh_seed(seed)
    for t in range(n_tokens):
        s1, s2, s3, u = _wh_next(s1, s2, s3)
        k = int(u * n_topics)
        if k >= n_topics:
            k = n_topics - 1
        z[t] = k
        counts[k] += 1

    cum = np.empty(n_topics, np.float64)
    for _ in range(n_sweeps):
        for t in range(n_tokens):
            w = words[t]
            k = z[t]
            counts[k] -= 1
            total = 0.0
            for kk in range(n_topics):
                total += topic_word[kk, w] * (counts[kk] + alpha)
                cum[kk] = total
            s1, s2, s3, u = _wh_next(s1, s2, s3)
            u *= total
            knew = 0
            while knew < n_topics - 1 and cum[knew] < u:
                knew += 1
            z[t] = knew
            counts[knew] += 1
    return counts


def _lasso_cd_impl(X, y, lam, tol, max_sweeps, intercept0, coef0):
    """Cyclic coordinate descent for L1-penalized logistic regression.

    Each coordinate step minimizes a quadratic majorizer of the average
    negative log-likelihood (curvature bounded by 1/4), so the penalized
    objective never increases. X must be Fortran-ordered so column views
    are contiguous. Returns (intercept, coef, sweeps, converged, objective)
    where objective holds the per-sweep penalized objective values.
    """
    n, p = X.shape
    coef = coef0.copy()
    b0 = intercept0
    eta = X @ coef + b0
    colsq = np.empty(p)
    for j in range(p):
        colsq[j] = np.dot(X[:, j], X[:, j])
    hj = 0.25 * colsq / n

    objective = np.zeros(max_sweeps)
    sweeps = 0
    converged = False
    for s in range(max_sweeps):
        max_delta = 0.0
        pvec = 1.0 / (1.0 + np.exp(-eta))
        d0 = -np.mean(pvec - y) / 0.25
        if d0 != 0.0:
            b0 += d0
            eta = eta + d0
        if abs(d0) > max_delta:
            max_delta = abs(d0)
        for j in range(p):
            if hj[j] == 0.0:
                continue
            pvec = 1.0 / (1.0 + np.exp(-eta))
            gj = np.dot(X[:, j], pvec - y) / n
            zj = hj[j] * coef[j] - gj
            if zj > lam:
                new = (zj - lam) / hj[j]
            elif zj < -lam:
                new = (zj + lam) / hj[j]
            else:
                new = 0.0
            d = new - coef[j]
            if d != 0.0:
                eta = eta + X[:, j] * d
                coef[j] = new
            if abs(d) > max_delta:
                max_delta = abs(d)
        nll = np.sum(np.where(eta > 0.0,
                              eta + np.log1p(np.exp(-eta)),
                              np.log1p(np.exp(eta)))) - np.dot(y, eta)
        objective[s] = nll / n + lam * np.sum(np.abs(coef))
        sweeps = s + 1
        if max_delta < tol:
            converged = True
            break
    return b0, coef, sweeps, converged, objective


def _nearest_scan_loop_impl(treated_w, control_w):
    """Exhaustive nearest-control scan under cosine similarity.

    Rows are already elementwise-weighted feature vectors. Ties and
    zero-norm rows resolve to the lowest control index. Returns
    (best_index, best_similarity) per treated row.
    """
    nt = treated_w.shape[0]
    nc = control_w.shape[0]
    d = treated_w.shape[1]
    cnorm = np.empty(nc)
    for j in range(nc):
        acc = 0.0
        for k in range(d):
            acc += control_w[j, k] * control_w[j, k]
        cnorm[j] = np.sqrt(acc)
    best = np.zeros(nt, np.int64)
    best_sim = np.empty(nt)
    for i in prange(nt):
        acc = 0.0
        for k in range(d):
            acc += treated_w[i, k] * treated_w[i, k]
        tnorm = np.sqrt(acc)
        bj = 0
        bs = -2.0
        for j in range(nc):
            s = 0.0
            if tnorm > 0.0 and cnorm[j] > 0.0:
                dot = 0.0
                for k in range(d):
                    dot += treated_w[i, k] * control_w[j, k]
                s = dot / (tnorm * cnorm[j])
            if s > bs:
                bs = s
                bj = j
        best[i] = bj
        best_sim[i] = bs
    return best, best_sim


def nearest_scan_numpy(treated_w, control_w, block=2048):
    """Vectorized nearest-control scan; same contract as the loop kernel."""
    tnorm = np.linalg.norm(treated_w, axis=1)
    cnorm = np.linalg.norm(control_w, axis=1)
    tn = np.where(tnorm > 0.0, tnorm, 1.0)
    cn = np.where(cnorm > 0.0, cnorm, 1.0)
    tu = treated_w / tn[:, None]
    cu = control_w / cn[:, None]
    tu[tnorm == 0.0] = 0.0
    cu[cnorm == 0.0] = 0.0
    nt = tu.shape[0]
    best = np.empty(nt, np.int64)
    best_sim = np.empty(nt)
    for lo in range(0, nt, block):
        hi = min(lo + block, nt)
        sims = tu[lo:hi] @ cu.T
        idx = sims.argmax(axis=1)  # first occurrence on ties: lowest index
        best[lo:hi] = idx
        best_sim[lo:hi] = sims[np.arange(hi - lo), idx]
    return best, best_sim


# measured: vectorized numpy beats the jitted build of this kernel, so it
# runs interpreted on both backends (and is flag-independent, bit for bit)
lasso_cd = _lasso_cd_impl

if USE_NUMBA:
    _wh_next = njit(cache=True)(_wh_next_impl)
    _wh_seed = njit(cache=True)(_wh_seed_impl)
    lda_gibbs_fit = njit(cache=True)(_lda_gibbs_fit_impl)
    lda_gibbs_infer = njit(cache=True)(_lda_gibbs_infer_impl)
    nearest_scan = njit(cache=True, parallel=True)(_nearest_scan_loop_impl)
else:
    _wh_next = _wh_next_impl
    _wh_seed = _wh_seed_impl
    lda_gibbs_fit = _lda_gibbs_fit_impl
    lda_gibbs_infer = _lda_gibbs_infer_impl
    nearest_scan = nearest_scan_numpy
