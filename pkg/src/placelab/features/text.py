"""Text normalization, TF-IDF weighting, and category-dictionary vectors."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..ingest import CategoryDictionary

# One left-to-right pass: URLs collapse to their domain, everything else
# splits on non-alphanumeric runs.
_TOKEN_RE = re.compile(r"(?P<url>https?://\S+|www\.\S+)|(?P<word>[a-z0-9]+)")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens; URLs become their bare domain."""
    out: list[str] = []
    for match in _TOKEN_RE.finditer(text.lower()):
        url = match.group("url")
        if url is not None:
            domain = _domain(url)
            if domain:
                out.append(domain)
        else:
            out.append(match.group("word"))
    return out


def _domain(url: str) -> str:
    rest = re.sub(r"^[a-z][a-z0-9+.-]*://", "", url)
    host = rest.split("/", 1)[0].split("?", 1)[0].split("#", 1)[0]
    host = host.rsplit("@", 1)[-1].split(":", 1)[0]
    if host.startswith("www.") and host.count(".") > 1:
        host = host[4:]
    return host.strip(".")


@dataclass(frozen=True)
class TfidfModel:
    """Fitted unigram TF-IDF weighting with a frozen vocabulary.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 over the N fitting documents;
    transformed rows are L2-normalized.
    """

    vocabulary: tuple[str, ...]
    idf: np.ndarray
    n_docs: int

    def transform(self, token_lists) -> np.ndarray:
        index = {t: i for i, t in enumerate(self.vocabulary)}
        out = np.zeros((len(token_lists), len(self.vocabulary)), dtype=np.float64)
        for row, tokens in enumerate(token_lists):
            for token in tokens:
                col = index.get(token)
                if col is not None:
                    out[row, col] += 1.0
        out *= self.idf[None, :]
        norms = np.linalg.norm(out, axis=1)
        nonzero = norms > 0
        out[nonzero] /= norms[nonzero, None]
        return out


def fit_tfidf(token_lists, max_vocab: int = 5000, min_df: int = 5) -> TfidfModel:
    """Fit on one token list per document.

    The vocabulary keeps the ``max_vocab`` highest-document-frequency terms
    with df >= min_df (ties resolved alphabetically), stored in name order.
    """
    df: dict[str, int] = {}
    for tokens in token_lists:
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1
    eligible = [(count, term) for term, count in df.items() if count >= min_df]
    eligible.sort(key=lambda pair: (-pair[0], pair[1]))
    vocabulary = tuple(sorted(term for _, term in eligible[:max_vocab]))
    n = len(token_lists)
    idf = np.array(
        [np.log((1.0 + n) / (1.0 + df[t])) + 1.0 for t in vocabulary], dtype=np.float64
    )
    return TfidfModel(vocabulary=vocabulary, idf=idf, n_docs=n)


def category_weights(tokens, dictionary: CategoryDictionary) -> dict[str, float]:
    """Per-category share of matching tokens; all categories always present."""
    names = dictionary.category_names()
    counts = dict.fromkeys(names, 0)
    total = 0
    for token in tokens:
        total += 1
        for name in dictionary.match(token):
            counts[name] += 1
    if total == 0:
        return {name: 0.0 for name in names}
    return {name: counts[name] / total for name in names}


def category_features(items, dictionary: CategoryDictionary) -> dict[str, float]:
    """Category weights over the concatenated text of the given content items."""
    tokens: list[str] = []
    for item in items:
        tokens.extend(tokenize(item.text))
    return category_weights(tokens, dictionary)
