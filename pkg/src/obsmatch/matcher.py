"""Nearest-control matching under weighted cosine similarity.

Every treated unit is linked to its most similar control (controls are
reusable); pairs below the caliper are pruned. The caliper sweep scans
upward from a starting threshold until balance and sample-size conditions
hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .diagnostics import standardized_mean_difference


class MatchError(ValueError):
    pass


class ConditionsNotMet(RuntimeError):
    """A caliper sweep exhausted its range without meeting all conditions."""


@dataclass(frozen=True)
class MatchedPair:
    treated_unit: str
    control_unit: str
    similarity: float


@dataclass
class MatchSet:
    caliper: float
    pairs: list
    unmatched_treated: list

    @property
    def n_pairs(self):
        return len(self.pairs)

    def treated_ids(self):
        return [p.treated_unit for p in self.pairs]

    def control_ids(self):
        return [p.control_unit for p in self.pairs]


def weighted_cosine_similarity(u, v, w) -> float:
    """Cosine of the elementwise-weighted vectors; 0 if either is all zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if not (u.shape == v.shape == w.shape):
        raise MatchError("u, v and w must have the same arity")
    uw = u * w
    vw = v * w
    nu = np.linalg.norm(uw)
    nv = np.linalg.norm(vw)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(uw, vw) / (nu * nv))


def _sorted_controls(control_ids, control_X):
    order = sorted(range(len(control_ids)), key=lambda i: control_ids[i])
    ids = [control_ids[i] for i in order]
    X = np.ascontiguousarray(control_X[order])
    return ids, X


def nearest_controls(treated_X, control_ids, control_X, weights):
    """Index and similarity of each treated unit's best control.

    Controls are scanned in unit-id order so exact similarity ties resolve
    to the lowest control id.
    """
    w = np.asarray(weights, dtype=np.float64)
    ids, CX = _sorted_controls(control_ids, np.asarray(control_X, dtype=np.float64))
    TW = np.ascontiguousarray(np.asarray(treated_X, dtype=np.float64) * w)
    CW = np.ascontiguousarray(CX * w)
    best_idx, best_sim = kernels.nearest_scan(TW, CW)
    return ids, best_idx, best_sim


def match_one_to_many(treated_ids, treated_X, control_ids, control_X,
                      weights, caliper) -> MatchSet:
    """Pair each treated unit with its nearest control, pruning below the caliper."""
    if len(treated_ids) == 0 or len(control_ids) == 0:
        raise MatchError("both treated and control groups must be nonempty")
    treated_X = np.asarray(treated_X, dtype=np.float64)
    control_X = np.asarray(control_X, dtype=np.float64)
    if treated_X.shape[1] != control_X.shape[1] or treated_X.shape[1] != len(weights):
        raise MatchError("feature arity mismatch between units and weights")
    ids, best_idx, best_sim = nearest_controls(treated_X, control_ids, control_X, weights)
    pairs = []
    unmatched = []
    for i, tid in enumerate(treated_ids):
        if best_sim[i] >= caliper:
            pairs.append(MatchedPair(tid, ids[best_idx[i]], float(best_sim[i])))
        else:
            unmatched.append(tid)
    if not pairs:
        raise MatchError(
            f"no pair reaches caliper {caliper}; try a lower caliper"
        )
    return MatchSet(caliper=float(caliper), pairs=pairs, unmatched_treated=unmatched)


@dataclass
class SweepConditions:
    smd_threshold: float = 0.1
    min_pairs: int = 1
    require_significance: bool = False
    alpha: float = 0.05
    # callable (MatchSet) -> p-value; required when require_significance is on
    p_value_fn: Optional[object] = None


@dataclass
class CaliperDiagnostics:
    caliper: float
    n_pairs: int
    max_abs_smd: float
    smd_by_covariate: dict
    balanced: bool
    enough_pairs: bool
    p_value: Optional[float] = None
    significant: Optional[bool] = None

    @property
    def ok(self):
        if not (self.balanced and self.enough_pairs):
            return False
        return self.significant is not False


@dataclass
class SweepResult:
    ok: bool
    caliper: Optional[float]
    match_set: Optional[MatchSet]
    trace: list = field(default_factory=list)


def _matched_smds(best_idx, best_sim, caliper, treated_X, control_X_sorted, names):
    keep = best_sim >= caliper
    if not keep.any():
        return {}, float("inf"), 0
    t = treated_X[keep]
    c = control_X_sorted[best_idx[keep]]
    smds = {}
    worst = 0.0
    for j, name in enumerate(names):
        try:
            d = standardized_mean_difference(t[:, j], c[:, j])
        except ValueError:
            d = float("inf")
        smds[name] = d
        worst = max(worst, abs(d))
    return smds, worst, int(keep.sum())


def sweep_caliper(treated_ids, treated_X, control_ids, control_X, weights, *,
                  names=None, start=0.9, step=0.005, stop=0.995,
                  conditions: SweepConditions | None = None) -> SweepResult:
    """Scan calipers upward; keep the first one meeting every condition.

    The full per-caliper diagnostic trace is always returned; when no
    caliper qualifies the result carries ok=False rather than raising.
    """
    if step <= 0:
        raise MatchError("sweep step must be positive")
    if conditions is None:
        conditions = SweepConditions()
    treated_X = np.asarray(treated_X, dtype=np.float64)
    control_X = np.asarray(control_X, dtype=np.float64)
    if names is None:
        names = [f"x{j}" for j in range(treated_X.shape[1])]
    ids, best_idx, best_sim = nearest_controls(treated_X, control_ids, control_X, weights)
    order = sorted(range(len(control_ids)), key=lambda i: control_ids[i])
    control_X_sorted = control_X[order]

    trace = []
    chosen = None
    caliper = float(start)
    while caliper <= stop + 1e-12:
        smds, worst, n_pairs = _matched_smds(
            best_idx, best_sim, caliper, treated_X, control_X_sorted, names
        )
        diag = CaliperDiagnostics(
            caliper=round(caliper, 10),
            n_pairs=n_pairs,
            max_abs_smd=worst,
            smd_by_covariate=smds,
            balanced=worst < conditions.smd_threshold,
            enough_pairs=n_pairs >= conditions.min_pairs,
        )
        if diag.balanced and diag.enough_pairs and conditions.require_significance:
            if conditions.p_value_fn is None:
                raise MatchError("require_significance needs a p_value_fn")
            ms = _build_match_set(treated_ids, ids, best_idx, best_sim, caliper)
            diag.p_value = float(conditions.p_value_fn(ms))
            diag.significant = diag.p_value <= conditions.alpha
        trace.append(diag)
        if diag.ok:
            chosen = caliper
            break
        caliper += step

    if chosen is None:
        return SweepResult(ok=False, caliper=None, match_set=None, trace=trace)
    match_set = _build_match_set(treated_ids, ids, best_idx, best_sim, chosen)
    return SweepResult(ok=True, caliper=round(chosen, 10), match_set=match_set, trace=trace)


def _build_match_set(treated_ids, sorted_control_ids, best_idx, best_sim, caliper):
    pairs = []
    unmatched = []
    for i, tid in enumerate(treated_ids):
        if best_sim[i] >= caliper:
            pairs.append(
                MatchedPair(tid, sorted_control_ids[best_idx[i]], float(best_sim[i]))
            )
        else:
            unmatched.append(tid)
    return MatchSet(caliper=round(float(caliper), 10), pairs=pairs, unmatched_treated=unmatched)
