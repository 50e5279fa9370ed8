"""Balance measurement, effect estimation, permutation significance and
mediation decomposition over a matched sample.

Matched controls are counted once per pair throughout (a control reused by
several treated units contributes with that multiplicity), mirroring its
weight in the effect estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BALANCE_THRESHOLD = 0.1

STATISTICS = ("eate", "absdiff", "median-ratio")


class DiagnosticsError(ValueError):
    pass


@dataclass
class BalanceRow:
    covariate: str
    smd_before: float
    smd_after: float

    @property
    def balanced(self):
        return abs(self.smd_after) < BALANCE_THRESHOLD


@dataclass
class EffectReport:
    estimator: str
    point_estimate: float
    p_value: float
    permutations: int
    seed: int
    n_pairs: int
    mode: str
    exact: bool = False

    @property
    def stars(self):
        if self.p_value <= 0.001:
            return "***"
        if self.p_value <= 0.01:
            return "**"
        if self.p_value <= 0.05:
            return "*"
        return ""


@dataclass
class MediationReport:
    mediator: str
    path_a: float
    se_a: float
    path_b: float
    se_b: float
    sobel_z: float
    sobel_p: float
    total_effect: float
    proportion_mediated: float  # NaN when the total effect is zero
    n: int

    @property
    def proportion_defined(self):
        return not math.isnan(self.proportion_mediated)


def _sample_variance(x):
    # single observations carry no spread information; treat as zero
    return float(np.var(x, ddof=1)) if x.size > 1 else 0.0


def standardized_mean_difference(treated_values, control_values) -> float:
    """Group mean gap in pooled-standard-deviation units.

    Zero when both samples are constant at the same value; an error when
    both are constant at different values (the gap is not measurable in
    standard-deviation units).
    """
    t = np.asarray(treated_values, dtype=np.float64)
    c = np.asarray(control_values, dtype=np.float64)
    if t.size == 0 or c.size == 0:
        raise DiagnosticsError("both samples must be nonempty")
    if not (np.isfinite(t).all() and np.isfinite(c).all()):
        raise DiagnosticsError("samples must be finite")
    mean_gap = t.mean() - c.mean()
    pooled = (_sample_variance(t) + _sample_variance(c)) / 2.0
    if pooled == 0.0:
        if mean_gap == 0.0:
            return 0.0
        raise DiagnosticsError("zero pooled variance with unequal means")
    return float(mean_gap / math.sqrt(pooled))


def balance_report(match_set, frame, selection, treated_ids, control_ids):
    """Per-covariate SMD before matching and over the matched samples.

    frame is a FeatureFrame (ids, names, matrix); selection supplies the
    covariate names to report on; treated_ids/control_ids are the full
    pre-match groups.
    """
    if match_set.n_pairs == 0:
        raise DiagnosticsError("empty match set")
    index = {uid: i for i, uid in enumerate(frame.ids)}
    t_rows = [index[u] for u in treated_ids]
    c_rows = [index[u] for u in control_ids]
    mt_rows = [index[p.treated_unit] for p in match_set.pairs]
    mc_rows = [index[p.control_unit] for p in match_set.pairs]
    rows = []
    for name in selection.names:
        col = frame.names.index(name)
        x = frame.matrix[:, col]
        rows.append(
            BalanceRow(
                covariate=name,
                smd_before=standardized_mean_difference(x[t_rows], x[c_rows]),
                smd_after=standardized_mean_difference(x[mt_rows], x[mc_rows]),
            )
        )
    return rows


def _pair_outcomes(match_set, outcomes):
    yt = []
    yc = []
    for pair in match_set.pairs:
        for uid in (pair.treated_unit, pair.control_unit):
            if uid not in outcomes or outcomes[uid] is None:
                raise DiagnosticsError(f"missing outcome for unit {uid!r}")
    for pair in match_set.pairs:
        yt.append(float(outcomes[pair.treated_unit]))
        yc.append(float(outcomes[pair.control_unit]))
    return np.asarray(yt), np.asarray(yc)


def _eate_stat(yt, yc):
    return float(np.mean((yt - yc) * 100.0 / yc))


def _absdiff_stat(yt, yc):
    return float(np.mean(yt - yc))


def _median_ratio_stat(yt, yc):
    return float(np.median(yt / yc))


def eate(match_set, outcomes) -> float:
    """Mean percent outcome lift over matched pairs.

    Undefined when any matched control outcome is zero; that pair is
    reported rather than silently skipped.
    """
    yt, yc = _pair_outcomes(match_set, outcomes)
    zero = np.flatnonzero(yc == 0.0)
    if zero.size:
        pair = match_set.pairs[int(zero[0])]
        raise DiagnosticsError(
            f"control outcome is zero for pair "
            f"({pair.treated_unit!r}, {pair.control_unit!r}); "
            "percent effect is undefined"
        )
    return _eate_stat(yt, yc)


def absolute_mean_difference(match_set, outcomes) -> float:
    """Mean outcome gap over matched pairs, in outcome units."""
    yt, yc = _pair_outcomes(match_set, outcomes)
    return _absdiff_stat(yt, yc)


@dataclass
class MedianRatioResult:
    ratio: float
    percent: float
    n_excluded: int
    n_units: int


def median_ratio_effect(match_set, rate_outcomes) -> MedianRatioResult:
    """Median of per-treated-unit median pair ratios (treated over control).

    Pairs with a nonpositive rate on either side are excluded and counted.
    """
    per_unit: dict = {}
    excluded = 0
    for pair in match_set.pairs:
        for uid in (pair.treated_unit, pair.control_unit):
            if uid not in rate_outcomes or rate_outcomes[uid] is None:
                raise DiagnosticsError(f"missing rate for unit {uid!r}")
        rt = float(rate_outcomes[pair.treated_unit])
        rc = float(rate_outcomes[pair.control_unit])
        if rt <= 0.0 or rc <= 0.0:
            excluded += 1
            continue
        per_unit.setdefault(pair.treated_unit, []).append(rt / rc)
    if not per_unit:
        raise DiagnosticsError("no pair with positive rates on both sides")
    inner = [float(np.median(ratios)) for _, ratios in sorted(per_unit.items())]
    ratio = float(np.median(inner))
    return MedianRatioResult(
        ratio=ratio,
        percent=(ratio - 1.0) * 100.0,
        n_excluded=excluded,
        n_units=len(inner),
    )


_STAT_FNS = {
    "eate": _eate_stat,
    "absdiff": _absdiff_stat,
    "median-ratio": _median_ratio_stat,
}


@dataclass
class PermutationResult:
    p_value: float
    observed: float
    permutations: int
    seed: int
    mode: str
    exact: bool


# paired-mode enumeration is exact only while 2**n fits the budget
_MAX_EXACT_PAIRS = 20


def permutation_test(match_set, outcomes, statistic="absdiff",
                     n_permutations=10_000, seed=0, mode="paired") -> PermutationResult:
    """Two-sided permutation p-value for a matched-pair effect statistic.

    mode "paired" swaps outcomes within pairs; when 2**n_pairs fits within
    the permutation budget the swap assignments are enumerated exhaustively
    and the p-value is exact (no add-one smoothing). mode "global" shuffles
    the pooled matched outcomes, preserving group sizes. Monte Carlo
    p-values use (1 + hits) / (1 + permutations).
    """
    if mode not in ("paired", "global"):
        raise DiagnosticsError(f"unknown permutation mode {mode!r}")
    if n_permutations < 1:
        raise DiagnosticsError("n_permutations must be at least 1")
    if isinstance(statistic, str):
        if statistic not in _STAT_FNS:
            raise DiagnosticsError(f"unknown statistic {statistic!r}")
        stat_name = statistic
        stat_fn = _STAT_FNS[statistic]
    else:
        stat_name = getattr(statistic, "__name__", "custom")
        stat_fn = statistic
    yt, yc = _pair_outcomes(match_set, outcomes)
    if stat_name in ("eate", "median-ratio"):
        _guard_ratio_inputs(stat_name, yt, yc)
    observed = stat_fn(yt, yc)
    n = yt.size
    rng = np.random.default_rng(seed)

    if mode == "paired" and n <= _MAX_EXACT_PAIRS and 2 ** n <= n_permutations:
        total = 2 ** n
        hits = 0
        for mask in range(total):
            swap = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
            pt = np.where(swap, yc, yt)
            pc = np.where(swap, yt, yc)
            if abs(stat_fn(pt, pc)) >= abs(observed):
                hits += 1
        return PermutationResult(
            p_value=hits / total, observed=observed, permutations=total,
            seed=seed, mode=mode, exact=True,
        )

    hits = 0
    if mode == "paired":
        for _ in range(n_permutations):
            swap = rng.random(n) < 0.5
            pt = np.where(swap, yc, yt)
            pc = np.where(swap, yt, yc)
            if abs(stat_fn(pt, pc)) >= abs(observed):
                hits += 1
    else:
        pool = np.concatenate([yt, yc])
        for _ in range(n_permutations):
            perm = rng.permutation(pool.size)
            pt = pool[perm[:n]]
            pc = pool[perm[n:]]
            if abs(stat_fn(pt, pc)) >= abs(observed):
                hits += 1
    return PermutationResult(
        p_value=(1 + hits) / (1 + n_permutations), observed=observed,
        permutations=n_permutations, seed=seed, mode=mode, exact=False,
    )


def _guard_ratio_inputs(stat_name, yt, yc):
    # ratio statistics stay well-defined under label swaps only if every
    # matched outcome is usable as a denominator
    if stat_name == "eate":
        bad = (yt == 0.0).any() or (yc == 0.0).any()
    else:
        bad = (yt <= 0.0).any() or (yc <= 0.0).any()
    if bad:
        raise DiagnosticsError(
            f"statistic {stat_name!r} needs nonzero (positive for ratios) "
            "outcomes on both sides of every pair"
        )


def permutation_null_quantile(match_set, outcomes, statistic="absdiff",
                              n_permutations=2000, seed=0, mode="paired",
                              q=0.975) -> float:
    """Quantile of |statistic| under permuted labels.

    Measures the estimator's noise scale around a null center; an estimate
    within this half-width of a reference effect is indistinguishable from
    it at the corresponding level.
    """
    if mode not in ("paired", "global"):
        raise DiagnosticsError(f"unknown permutation mode {mode!r}")
    stat_fn = _STAT_FNS[statistic] if isinstance(statistic, str) else statistic
    yt, yc = _pair_outcomes(match_set, outcomes)
    n = yt.size
    rng = np.random.default_rng(seed)
    stats = np.empty(n_permutations)
    pool = np.concatenate([yt, yc])
    for r in range(n_permutations):
        if mode == "paired":
            swap = rng.random(n) < 0.5
            pt = np.where(swap, yc, yt)
            pc = np.where(swap, yt, yc)
        else:
            perm = rng.permutation(pool.size)
            pt = pool[perm[:n]]
            pc = pool[perm[n:]]
        stats[r] = abs(stat_fn(pt, pc))
    return float(np.quantile(stats, q))


def effect_report(match_set, outcomes, statistic="absdiff",
                  n_permutations=10_000, seed=0, mode="paired") -> EffectReport:
    """Point estimate plus permutation significance for one statistic."""
    if statistic == "eate":
        point = eate(match_set, outcomes)
    elif statistic == "absdiff":
        point = absolute_mean_difference(match_set, outcomes)
    elif statistic == "median-ratio":
        point = median_ratio_effect(match_set, outcomes).ratio
    else:
        raise DiagnosticsError(f"unknown statistic {statistic!r}")
    perm = permutation_test(
        match_set, outcomes, statistic=statistic,
        n_permutations=n_permutations, seed=seed, mode=mode,
    )
    return EffectReport(
        estimator=statistic,
        point_estimate=point,
        p_value=perm.p_value,
        permutations=perm.permutations,
        seed=seed,
        n_pairs=match_set.n_pairs,
        mode=mode,
        exact=perm.exact,
    )


def _ols(X, y):
    """Least squares with classical slope standard errors.

    X excludes the intercept column; one is appended internally.
    Returns (coefficients, standard_errors) for the non-intercept columns.
    """
    n = y.size
    Xi = np.column_stack([X, np.ones(n)])
    k = Xi.shape[1]
    if n <= k:
        raise DiagnosticsError("not enough observations for regression")
    beta, *_ = np.linalg.lstsq(Xi, y, rcond=None)
    resid = y - Xi @ beta
    dof = n - k
    sigma2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(Xi.T @ Xi)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    return beta[:-1], se[:-1]


def _normal_two_sided_p(z):
    return math.erfc(abs(z) / math.sqrt(2.0))


def sobel_z(a, b, se_a, se_b) -> float:
    """Indirect-effect z statistic: ab / sqrt(b^2 se_a^2 + a^2 se_b^2).

    Zero when the indirect effect itself is zero, regardless of the
    (then-degenerate) denominator.
    """
    indirect = a * b
    if indirect == 0.0:
        return 0.0
    return indirect / math.sqrt(b * b * se_a * se_a + a * a * se_b * se_b)


def sobel_test(treatment, mediator, outcome, mediator_name="mediator") -> MediationReport:
    """Significance of the indirect path treatment -> mediator -> outcome.

    Fits mediator ~ treatment and outcome ~ mediator + treatment by
    ordinary least squares; the indirect effect is the product of the two
    slopes, with z = ab / sqrt(b^2 se_a^2 + a^2 se_b^2) and a two-sided
    normal p-value. The mediated proportion divides by the total effect
    from outcome ~ treatment and is NaN when that total is zero.
    """
    t = np.asarray(treatment, dtype=np.float64)
    m = np.asarray(mediator, dtype=np.float64)
    y = np.asarray(outcome, dtype=np.float64)
    if not (t.shape == m.shape == y.shape) or t.ndim != 1:
        raise DiagnosticsError("treatment, mediator and outcome must be aligned vectors")
    if np.var(m) == 0.0:
        raise DiagnosticsError("mediator has zero variance")
    if np.var(t) == 0.0:
        raise DiagnosticsError("treatment has zero variance")
    (a,), (se_a,) = _ols(t[:, None], m)
    (b, _direct), (se_b, _) = _ols(np.column_stack([m, t]), y)
    (total,), _ = _ols(t[:, None], y)
    indirect = a * b
    z = sobel_z(a, b, se_a, se_b)
    # a total effect at machine-precision zero makes the mediated share
    # meaningless; report it as undefined rather than a garbage ratio
    zero_scale = 1e-12 * (np.std(y) / np.std(t) + 1.0)
    proportion = indirect / total if abs(total) > zero_scale else float("nan")
    return MediationReport(
        mediator=mediator_name,
        path_a=float(a),
        se_a=float(se_a),
        path_b=float(b),
        se_b=float(se_b),
        sobel_z=float(z),
        sobel_p=_normal_two_sided_p(z),
        total_effect=float(total),
        proportion_mediated=float(proportion),
        n=int(t.size),
    )
