"""L1-penalized logistic regression for covariate selection.

The treatment label is regressed on the standardized covariates; the
penalty strength comes from cross-validated AUC with a preference for
sparser models among near-ties, and the surviving coefficients double as
similarity weights for matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class SelectorError(ValueError):
    pass


@dataclass
class LassoLogisticModel:
    intercept: float
    coefficients: np.ndarray
    lam: float
    converged: bool
    iterations_used: int
    objective_trace: np.ndarray
    feature_names: list = field(default_factory=list)

    def nonzero_count(self, eps=1e-12):
        return int(np.sum(np.abs(self.coefficients) > eps))

    def decision_scores(self, X):
        return self.intercept + np.asarray(X) @ self.coefficients


@dataclass
class CovariateSelection:
    names: list
    weights: np.ndarray


@dataclass
class CrossValidationResult:
    lambdas: np.ndarray
    mean_auc: np.ndarray
    fold_auc: np.ndarray  # (n_lambdas, folds)
    nonzero_counts: np.ndarray  # on full-data fits
    chosen_lambda: float
    chosen_index: int
    model: LassoLogisticModel  # full-data fit at chosen lambda
    seed: int
    folds: int


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise SelectorError("X must be (n, p) and y length n")
    if not np.isfinite(X).all():
        raise SelectorError("X contains non-finite values")
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise SelectorError("y must be binary 0/1")
    if classes.size < 2:
        raise SelectorError("y contains a single class")
    return X, y


def lambda_max(X, y) -> float:
    """Smallest penalty at which the fitted coefficient vector is all zero.

    Padded by a relative epsilon so the returned value lands on the kill
    side of the solver's own gradient rounding.
    """
    X, y = _check_xy(X, y)
    resid = y - y.mean()
    return float(np.max(np.abs(X.T @ resid)) / X.shape[0]) * (1.0 + 1e-12)


def fit_lasso_logistic(X, y, lam, tol=1e-7, max_iterations=10_000,
                       feature_names=None, warm_start=None) -> LassoLogisticModel:
    """Coordinate descent on the penalized average negative log-likelihood.

    The intercept is unpenalized and initialized at the null-model optimum,
    so any lam >= lambda_max(X, y) returns exactly zero coefficients.
    """
    X, y = _check_xy(X, y)
    if lam < 0:
        raise SelectorError("lambda must be nonnegative")
    n, p = X.shape
    Xf = np.asfortranarray(X)
    ybar = y.mean()
    if warm_start is None:
        b0 = math.log(ybar / (1.0 - ybar))
        coef0 = np.zeros(p)
    else:
        b0, coef0 = warm_start
        coef0 = np.asarray(coef0, dtype=np.float64)
    intercept, coef, sweeps, converged, objective = kernels.lasso_cd(
        Xf, y, float(lam), float(tol), int(max_iterations), float(b0), coef0
    )
    return LassoLogisticModel(
        intercept=float(intercept),
        coefficients=np.asarray(coef),
        lam=float(lam),
        converged=bool(converged),
        iterations_used=int(sweeps),
        objective_trace=np.asarray(objective[:sweeps]).copy(),
        feature_names=list(feature_names) if feature_names is not None else [],
    )


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative.

    Ties count one half (average-rank formulation).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise SelectorError("AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average of 1-based ranks
        i = j + 1
    rank_sum_pos = float(ranks[np.asarray(labels) == 1].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def default_lambda_grid(X, y, size=50, ratio=1e-3) -> np.ndarray:
    """Log-spaced grid from lambda_max down to lambda_max * ratio."""
    top = lambda_max(X, y)
    return np.geomspace(top, top * ratio, size)


def stratified_folds(y, folds, seed):
    """Disjoint stratified partition; both classes in every fold."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.shape[0], dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size < folds:
            raise SelectorError(
                f"class {cls} has {idx.size} members, fewer than {folds} folds"
            )
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def cross_validate(X, y, lambda_grid=None, folds=10, seed=0,
                   sparsity_tolerance=0.01, tol=1e-7, max_iterations=10_000,
                   feature_names=None) -> CrossValidationResult:
    """Pick the penalty by mean validation AUC, preferring sparser models.

    Among all grid points whose mean AUC is within sparsity_tolerance of
    the maximum, the one with the fewest nonzero coefficients on the
    full-data fit wins (largest penalty on ties).
    """
    X, y = _check_xy(X, y)
    if X.shape[0] < folds:
        raise SelectorError("need at least as many rows as folds")
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(X, y)
    lambdas = np.sort(np.asarray(lambda_grid, dtype=np.float64))[::-1]
    if lambdas.size == 0:
        raise SelectorError("empty lambda grid")

    assignment = stratified_folds(y, folds, seed)
    fold_auc = np.empty((lambdas.size, folds))
    for fold in range(folds):
        val = assignment == fold
        train = ~val
        warm = None
        for li, lam in enumerate(lambdas):
            model = fit_lasso_logistic(
                X[train], y[train], lam, tol=tol,
                max_iterations=max_iterations, warm_start=warm,
            )
            warm = (model.intercept, model.coefficients)
            fold_auc[li, fold] = auc(model.decision_scores(X[val]), y[val])
    mean_auc = fold_auc.mean(axis=1)

    full_models = []
    warm = None
    for lam in lambdas:
        model = fit_lasso_logistic(
            X, y, lam, tol=tol, max_iterations=max_iterations,
            feature_names=feature_names, warm_start=warm,
        )
        warm = (model.intercept, model.coefficients)
        full_models.append(model)
    nonzero = np.array([m.nonzero_count() for m in full_models])

    best = float(mean_auc.max())
    qualifying = np.flatnonzero(mean_auc >= best - sparsity_tolerance)
    # fewest nonzeros wins; grid is descending so the first hit is the
    # largest qualifying penalty
    chosen = int(qualifying[np.argmin(nonzero[qualifying])])
    return CrossValidationResult(
        lambdas=lambdas,
        mean_auc=mean_auc,
        fold_auc=fold_auc,
        nonzero_counts=nonzero,
        chosen_lambda=float(lambdas[chosen]),
        chosen_index=chosen,
        model=full_models[chosen],
        seed=seed,
        folds=folds,
    )


def select_covariates(model: LassoLogisticModel, eps=1e-12) -> CovariateSelection:
    """Names and |coefficient| weights of the surviving covariates."""
    coef = model.coefficients
    keep = np.flatnonzero(np.abs(coef) > eps)
    if keep.size == 0:
        raise SelectorError(
            "all coefficients are zero; refit with a smaller lambda"
        )
    names = (
        [model.feature_names[j] for j in keep]
        if model.feature_names
        else [f"x{j}" for j in keep]
    )
    return CovariateSelection(names=names, weights=np.abs(coef[keep]))
