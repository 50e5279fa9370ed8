"""Category lexicons with prefix wildcards.

File format, one category per line::

    anger: mad* furious rage
    reward: prize win* reward*

A trailing ``*`` makes an entry match any token with that prefix. Lines
starting with ``#`` and blank lines are ignored.
"""

from __future__ import annotations


class LexiconError(ValueError):
    pass


class Lexicon:
    def __init__(self, categories: dict):
        """categories maps name -> iterable of entries (literal or 'stem*')."""
        self.exact: dict = {}
        self.prefixes: dict = {}
        for name, entries in categories.items():
            entries = list(entries)
            if not entries:
                raise LexiconError(f"category {name!r} has no entries")
            exact = set()
            prefixes = []
            for entry in entries:
                if not entry:
                    raise LexiconError(f"category {name!r} has an empty entry")
                if "*" in entry[:-1]:
                    raise LexiconError(
                        f"category {name!r}: wildcard must be final in {entry!r}"
                    )
                if entry.endswith("*"):
                    prefixes.append(entry[:-1])
                else:
                    exact.add(entry)
            self.exact[name] = frozenset(exact)
            self.prefixes[name] = tuple(prefixes)

    @property
    def categories(self):
        return sorted(self.exact)

    def matches(self, name: str, token: str) -> bool:
        if token in self.exact[name]:
            return True
        return any(token.startswith(p) for p in self.prefixes[name])

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        categories = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if ":" not in line:
                    raise LexiconError(f"{path}:{line_no}: expected 'category: entries'")
                name, _, rest = line.partition(":")
                name = name.strip()
                if name in categories:
                    raise LexiconError(f"{path}:{line_no}: duplicate category {name!r}")
                categories[name] = rest.split()
        if not categories:
            raise LexiconError(f"{path}: no categories found")
        return cls(categories)


def lexicon_counts(tokens, lexicon: Lexicon) -> dict:
    """Per-category proportion of tokens matching that category's entries."""
    total = len(tokens)
    out = {name: 0.0 for name in lexicon.categories}
    if total == 0:
        return out
    for name in lexicon.categories:
        hits = sum(1 for t in tokens if lexicon.matches(name, t))
        out[name] = hits / total
    return out
