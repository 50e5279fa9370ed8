"""Synthetic observational studies with known ground truth.

Covariates drive both treatment assignment (through a logistic model) and
the baseline outcome, planting measurable confounding; both potential
outcomes are stored per unit, so the exact effect is available to tests
while estimators only ever see the realized outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class MediationPlan:
    """Indirect path: mediator = a * T + noise, outcome += b * mediator."""

    a: float
    b: float
    noise_sd: float = 1.0


@dataclass(frozen=True)
class IntensityPlan:
    """Feedback-count model for cutoff sweeps.

    Treated units receive offset + Poisson(extra_mean) comments, controls
    receive none, so every analysis cutoff in [1, offset] dichotomizes the
    sample into exactly the generating exposure.
    """

    offset: int = 10
    extra_mean: float = 5.0


@dataclass(frozen=True)
class SynthConfig:
    n_units: int = 1000
    n_covariates: int = 1
    treatment_weights: tuple = (1.0,)  # per-covariate effect on the log-odds of treatment
    outcome_weights: tuple = (1.0,)  # per-covariate effect on the baseline outcome
    true_effect: float = 0.0
    effect_sd: float = 0.0  # > 0 draws heterogeneous per-unit effects
    outcome_noise_sd: float = 1.0
    outcome_baseline: float = 0.0
    mediation: Optional[MediationPlan] = None
    intensity: Optional[IntensityPlan] = None
    seed: int = 0
    max_regenerate: int = 5

    def __post_init__(self):
        if self.n_units < 10:
            raise SynthError("n_units must be at least 10")
        if len(self.treatment_weights) != self.n_covariates:
            raise SynthError("treatment_weights length must equal n_covariates")
        if len(self.outcome_weights) != self.n_covariates:
            raise SynthError("outcome_weights length must equal n_covariates")
        if not np.isfinite(self.outcome_noise_sd) or self.outcome_noise_sd < 0:
            raise SynthError("outcome_noise_sd must be finite and nonnegative")


@dataclass
class SynthStudy:
    config: SynthConfig
    unit_ids: list
    covariates: np.ndarray  # (n, p)
    treatment: np.ndarray  # (n,) int 0/1
    outcome: np.ndarray  # realized outcome, = potential_outcome[treatment]
    y_control: np.ndarray  # potential outcome under control
    y_treated: np.ndarray  # potential outcome under treatment
    effect_per_unit: np.ndarray
    mediator: Optional[np.ndarray] = None
    intensity: Optional[np.ndarray] = None
    covariate_names: list = field(default_factory=list)

    @property
    def n_units(self):
        return len(self.unit_ids)

    def treated_ids(self):
        return [self.unit_ids[i] for i in np.flatnonzero(self.treatment == 1)]

    def control_ids(self):
        return [self.unit_ids[i] for i in np.flatnonzero(self.treatment == 0)]

    def outcomes_by_id(self, values=None):
        values = self.outcome if values is None else values
        return {uid: float(values[i]) for i, uid in enumerate(self.unit_ids)}

    def naive_difference(self) -> float:
        """Unmatched treated-minus-control mean outcome gap."""
        return float(
            self.outcome[self.treatment == 1].mean()
            - self.outcome[self.treatment == 0].mean()
        )


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_study(config: SynthConfig) -> SynthStudy:
    """Draw a study from the configured generator; deterministic per seed.

    If a weight configuration leaves one treatment arm empty, assignment is
    re-drawn with a recentered logit up to config.max_regenerate times.
    """
    rng = np.random.default_rng(config.seed)
    n, p = config.n_units, config.n_covariates
    X = rng.standard_normal((n, p))
    gamma = np.asarray(config.treatment_weights, dtype=np.float64)
    delta = np.asarray(config.outcome_weights, dtype=np.float64)

    logits = X @ gamma
    shift = 0.0
    for attempt in range(config.max_regenerate + 1):
        T = (rng.random(n) < _sigmoid(logits + shift)).astype(np.int64)
        if 0 < T.sum() < n:
            break
        shift = -float(np.median(logits))
        if attempt == config.max_regenerate:
            raise SynthError(
                "treatment assignment is degenerate; all units fall in one arm"
            )

    noise = rng.normal(0.0, config.outcome_noise_sd, n)
    y0 = config.outcome_baseline + X @ delta + noise
    if config.effect_sd > 0:
        tau = rng.normal(config.true_effect, config.effect_sd, n)
    else:
        tau = np.full(n, config.true_effect)
    y1 = y0 + tau

    mediator = None
    if config.mediation is not None:
        med = config.mediation
        med_noise = rng.normal(0.0, med.noise_sd, n)
        # the mediator's noise is shared across both potential outcomes
        y0 = y0 + med.b * (med.a * 0.0 + med_noise)
        y1 = y1 + med.b * (med.a * 1.0 + med_noise)
        mediator = med.a * T + med_noise

    intensity = None
    if config.intensity is not None:
        plan = config.intensity
        intensity = T * (plan.offset + rng.poisson(plan.extra_mean, n))

    outcome = np.where(T == 1, y1, y0)
    width = len(str(n))
    unit_ids = [f"u{i:0{width}d}" for i in range(n)]
    return SynthStudy(
        config=config,
        unit_ids=unit_ids,
        covariates=X,
        treatment=T,
        outcome=outcome,
        y_control=y0,
        y_treated=y1,
        effect_per_unit=tau,
        mediator=mediator,
        intensity=intensity,
        covariate_names=[f"x{j}" for j in range(p)],
    )


def oracle_true_effect(study: SynthStudy, match_set=None) -> float:
    """Exact average effect over matched treated units, from stored
    counterfactuals (over all treated units when no match set is given)."""
    te = study.y_treated - study.y_control
    if match_set is None:
        return float(te[study.treatment == 1].mean())
    index = {uid: i for i, uid in enumerate(study.unit_ids)}
    rows = [index[p.treated_unit] for p in match_set.pairs]
    if not rows:
        raise SynthError("match set has no pairs")
    return float(te[rows].mean())


def _topic_word(topic, index):
    # letter-only tokens survive alphabetic tokenization intact
    letters = "abcdefghijklmnopqrstuvwxyz"
    return (letters[topic % 26] * 2) + letters[index // 26] + letters[index % 26]


def sample_documents(study: SynthStudy, *, words_per_doc=60, vocab_per_topic=40,
                     seed=None):
    """Synthetic first-post texts whose topic mix encodes the covariates.

    Each covariate gets its own topic with a disjoint vocabulary block,
    plus one filler topic; a unit's topic mixture is the softmax of its
    covariate values (filler at zero). Returns (texts, n_topics).
    """
    rng = np.random.default_rng(study.config.seed + 1 if seed is None else seed)
    p = study.covariates.shape[1]
    k = p + 1
    vocab = [
        [_topic_word(topic, w) for w in range(vocab_per_topic)] for topic in range(k)
    ]
    texts = []
    for i in range(study.n_units):
        logits = np.concatenate([study.covariates[i], [0.0]])
        theta = np.exp(logits - logits.max())
        theta /= theta.sum()
        topics = rng.choice(k, size=words_per_doc, p=theta)
        words = [vocab[t][rng.integers(vocab_per_topic)] for t in topics]
        texts.append(" ".join(words))
    return texts, k


def export_events(study: SynthStudy, path, *, cutoff=4, texts=None,
                  start_time=1_000_000.0, day_seconds=86_400.0):
    """Write the study as the newline-delimited event records the corpus
    ingester reads, so the full text pipeline can run end to end.

    Every unit posts once, receives comments encoding its treatment (or its
    intensity count when one was generated), then returns once carrying a
    badge that encodes its outcome. Units with a nonpositive outcome get no
    badge and therefore drop out of the badge-based cohort; pick an
    outcome_baseline large enough to avoid that when exporting.
    """
    import json

    if texts is None:
        texts, _ = sample_documents(study)
    lines = []
    for i, uid in enumerate(study.unit_ids):
        t0 = start_time + i * 7.0
        lines.append({
            "event_id": f"{uid}-post",
            "author": uid,
            "kind": "self_post",
            "created_at": t0,
            "title": f"checking in {uid}",
            "body": texts[i],
            "score": int(study.treatment[i]),
        })
        if study.intensity is not None:
            n_comments = int(study.intensity[i])
        else:
            n_comments = cutoff + 1 if study.treatment[i] == 1 else max(cutoff - 2, 0)
        for c in range(n_comments):
            lines.append({
                "event_id": f"{uid}-c{c}",
                "author": f"commenter{c}",
                "kind": "comment",
                "parent_post_id": f"{uid}-post",
                "created_at": t0 + 60.0 + c,
                "body": "keep going",
            })
        outcome = float(study.outcome[i])
        return_day = 20 + (i % 15)  # varied, so lifespans carry information
        record = {
            "event_id": f"{uid}-return",
            "author": uid,
            "kind": "comment",
            "parent_post_id": f"{uid}-post",
            "created_at": t0 + return_day * day_seconds,
            "body": "back again",
        }
        if outcome > 0:
            kg = outcome * 0.45359237
            record["badge_text"] = f"{outcome:.2f}lbs / {kg:.2f}kg"
        lines.append(record)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in lines:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return len(lines)
