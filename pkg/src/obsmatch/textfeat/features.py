"""Turn first-post texts into a standardized, named covariate matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lda import TopicModel, lda_infer
from .lexicon import Lexicon, lexicon_counts
from .sentiment import sentiment_score
from .tokens import QUESTION_WORDS, question_word_count, tokenize, word_count


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    kind: str  # topic | lexicon | sentiment | question | length
    mean: float
    sd: float


@dataclass
class FeatureSchema:
    columns: list
    dropped: list = field(default_factory=list)

    @property
    def names(self):
        return [c.name for c in self.columns]

    def __len__(self):
        return len(self.columns)


@dataclass
class FeatureFrame:
    """Row-aligned unit ids, column names and the standardized matrix."""

    ids: list
    names: list
    matrix: np.ndarray

    def index_of(self, unit_id):
        return self.ids.index(unit_id)

    def column(self, name):
        return self.matrix[:, self.names.index(name)]


def raw_feature_row(text, model: TopicModel, lexicon: Lexicon, *,
                    infer_iterations=64, question_mode="aggregate"):
    """Unstandardized feature values for one text, with (name, kind) labels."""
    tokens = tokenize(text)
    theta = lda_infer(model, tokens, iterations=infer_iterations)
    names = [(f"topic_{k}", "topic") for k in range(model.n_topics)]
    values = list(theta)
    counts = lexicon_counts(tokens, lexicon)
    for cat in lexicon.categories:
        names.append((f"lex_{cat}", "lexicon"))
        values.append(counts[cat])
    names.append(("sentiment", "sentiment"))
    values.append(sentiment_score(text))
    if question_mode == "aggregate":
        names.append(("question_words", "question"))
        values.append(float(question_word_count(tokens)))
    elif question_mode == "per_word":
        per = question_word_count(tokens, per_word=True)
        for w in sorted(QUESTION_WORDS):
            names.append((f"question_{w}", "question"))
            values.append(float(per[w]))
    else:
        raise FeatureError(f"unknown question_mode {question_mode!r}")
    names.append(("length", "length"))
    values.append(float(word_count(text)))
    return names, np.asarray(values, dtype=np.float64)


def standardize_matrix(raw: np.ndarray, names, kinds):
    """Z-score columns; constant columns are dropped and reported."""
    n = raw.shape[0]
    means = raw.mean(axis=0)
    sds = raw.std(axis=0, ddof=1) if n > 1 else np.zeros(raw.shape[1])
    keep = sds > 0.0
    columns = [
        FeatureColumn(name=names[j], kind=kinds[j], mean=float(means[j]), sd=float(sds[j]))
        for j in range(raw.shape[1])
        if keep[j]
    ]
    dropped = [names[j] for j in range(raw.shape[1]) if not keep[j]]
    matrix = (raw[:, keep] - means[keep]) / sds[keep]
    return FeatureSchema(columns=columns, dropped=dropped), matrix


def build_feature_matrix(texts, model: TopicModel, lexicon: Lexicon, *,
                         infer_iterations=64, question_mode="aggregate"):
    """Standardized n-by-p covariate matrix for a cohort's first posts.

    Returns (FeatureSchema, matrix); matrix columns align with the schema
    and have mean 0, sd 1 over the cohort. Constant columns are dropped
    and listed in schema.dropped.
    """
    texts = list(texts)
    if not texts:
        raise FeatureError("no texts to featurize")
    labels = None
    rows = []
    for text in texts:
        names, values = raw_feature_row(
            text, model, lexicon,
            infer_iterations=infer_iterations, question_mode=question_mode,
        )
        if labels is None:
            labels = names
        rows.append(values)
    raw = np.vstack(rows)
    if not np.isfinite(raw).all():
        raise FeatureError("non-finite raw feature value")
    names = [n for n, _ in labels]
    kinds = [k for _, k in labels]
    return standardize_matrix(raw, names, kinds)
