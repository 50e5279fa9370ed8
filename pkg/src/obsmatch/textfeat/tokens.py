"""Tokenization and simple token-level features."""

import re

# Lowercase alphabetic runs; apostrophes survive inside a token ("don't").
_TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)*")

QUESTION_WORDS = frozenset(
    {"what", "where", "when", "which", "who", "whose", "why", "how"}
)


def tokenize(text):
    if not text:
        return []
    return _TOKEN_RE.findall(text.lower())


def question_word_count(tokens, per_word=False):
    """Total occurrences of the eight interrogative words.

    With per_word=True, return a dict of per-word counts instead.
    """
    if per_word:
        counts = {w: 0 for w in sorted(QUESTION_WORDS)}
        for t in tokens:
            if t in counts:
                counts[t] += 1
        return counts
    return sum(1 for t in tokens if t in QUESTION_WORDS)


def word_count(text):
    """Whitespace-delimited word count (the raw length feature)."""
    return len(text.split()) if text else 0
