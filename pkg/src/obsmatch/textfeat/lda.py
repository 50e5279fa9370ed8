"""Latent Dirichlet allocation via collapsed Gibbs sampling.

Fitting is single-threaded and driven by an explicit seeded generator, so a
(corpus, parameters, seed) triple always yields the same model, bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .. import kernels

MODEL_FORMAT = "obsmatch-topic-model"
MODEL_VERSION = 1


class TopicModelError(ValueError):
    pass


@dataclass
class TopicModel:
    n_topics: int
    alpha: float
    beta: float
    vocabulary: dict  # token -> column index
    topic_word: np.ndarray  # (n_topics, vocab), rows sum to 1
    seed: int
    iterations: int

    def __post_init__(self):
        if self.n_topics < 2:
            raise TopicModelError("n_topics must be at least 2")
        if self.alpha <= 0 or self.beta <= 0:
            raise TopicModelError("alpha and beta must be positive")


def _encode(documents, vocabulary):
    words = []
    doc_ids = []
    for d, tokens in enumerate(documents):
        for tok in tokens:
            idx = vocabulary.get(tok)
            if idx is not None:
                words.append(idx)
                doc_ids.append(d)
    return (
        np.asarray(words, dtype=np.int64),
        np.asarray(doc_ids, dtype=np.int64),
    )


def lda_fit(documents, n_topics, iterations=2000, alpha=0.4, beta=0.1, seed=0) -> TopicModel:
    """Fit a topic model on tokenized documents.

    documents: sequence of token lists. Requires at least n_topics distinct
    documents and a nonempty vocabulary.
    """
    documents = [list(d) for d in documents]
    if not documents:
        raise TopicModelError("empty corpus")
    if len({tuple(d) for d in documents}) < n_topics:
        raise TopicModelError(
            f"need at least {n_topics} distinct documents, got fewer"
        )
    vocab_tokens = sorted({tok for d in documents for tok in d})
    if not vocab_tokens:
        raise TopicModelError("empty vocabulary")
    vocabulary = {tok: i for i, tok in enumerate(vocab_tokens)}
    words, doc_ids = _encode(documents, vocabulary)
    _, nkw, nk = kernels.lda_gibbs_fit(
        words, doc_ids, len(documents), len(vocabulary), n_topics,
        float(alpha), float(beta), int(iterations), int(seed),
    )
    denom = nk.astype(np.float64) + len(vocabulary) * beta
    topic_word = (nkw.astype(np.float64) + beta) / denom[:, None]
    return TopicModel(
        n_topics=n_topics,
        alpha=float(alpha),
        beta=float(beta),
        vocabulary=vocabulary,
        topic_word=topic_word,
        seed=int(seed),
        iterations=int(iterations),
    )


def lda_infer(model: TopicModel, tokens, iterations=64) -> np.ndarray:
    """Topic proportions for one tokenized document.

    Out-of-vocabulary tokens are ignored; a document with no known tokens
    gets the uniform distribution.
    """
    ids = np.asarray(
        [model.vocabulary[t] for t in tokens if t in model.vocabulary],
        dtype=np.int64,
    )
    k = model.n_topics
    if ids.size == 0:
        return np.full(k, 1.0 / k)
    counts = kernels.lda_gibbs_infer(
        ids, model.topic_word, model.alpha, int(iterations), model.seed
    )
    theta = (counts.astype(np.float64) + model.alpha) / (ids.size + k * model.alpha)
    return theta


def save_topic_model(model: TopicModel, path):
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "n_topics": model.n_topics,
        "alpha": model.alpha,
        "beta": model.beta,
        "seed": model.seed,
        "iterations": model.iterations,
        "vocabulary": model.vocabulary,
        "topic_word": [[repr(v) for v in row] for row in model.topic_word.tolist()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_topic_model(path) -> TopicModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise TopicModelError(f"{path}: not a topic model file")
    if payload.get("version") != MODEL_VERSION:
        raise TopicModelError(f"{path}: unsupported version {payload.get('version')}")
    topic_word = np.array(
        [[float(v) for v in row] for row in payload["topic_word"]], dtype=np.float64
    )
    return TopicModel(
        n_topics=payload["n_topics"],
        alpha=payload["alpha"],
        beta=payload["beta"],
        vocabulary={str(k): int(v) for k, v in payload["vocabulary"].items()},
        topic_word=topic_word,
        seed=payload["seed"],
        iterations=payload["iterations"],
    )
