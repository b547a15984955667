"""Shared text utilities: tokenization and a small Okapi BM25 scorer.

The same tokenizer is used everywhere a "token" is mentioned (indexing,
query scoring, chunking), so counts are consistent across modules.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from typing import Iterable, Optional

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Minimal English stopword list; only applied when explicitly enabled.
DEFAULT_STOPWORDS = frozenset(
    "a an and are as at be by for from has in is it of on or that the to was with".split()
)


def tokenize(text: str, stopwords: Optional[frozenset[str]] = None) -> list[str]:
    """Lowercase and split on non-alphanumeric characters (underscore splits too)."""
    tokens = [t.lower() for t in _TOKEN_RE.findall(text)]
    if stopwords:
        tokens = [t for t in tokens if t not in stopwords]
    return tokens


class BM25Scorer:
    """Okapi BM25 over pre-tokenized documents keyed by an arbitrary id.

    idf = ln(1 + (N - df + 0.5) / (df + 0.5)), which is non-negative by
    construction. Defaults k1=1.5, b=0.75.
    """

    def __init__(
        self,
        docs: dict[str, list[str]],
        k1: float = 1.5,
        b: float = 0.75,
    ) -> None:
        self.k1 = k1
        self.b = b
        self.doc_tf: dict[str, Counter[str]] = {d: Counter(toks) for d, toks in docs.items()}
        self.doc_len: dict[str, int] = {d: len(toks) for d, toks in docs.items()}
        self.n_docs = len(docs)
        self.df: Counter[str] = Counter()
        for tf in self.doc_tf.values():
            for term in tf:
                self.df[term] += 1
        self.avgdl = (sum(self.doc_len.values()) / self.n_docs) if self.n_docs else 0.0

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def score(self, query_tokens: Iterable[str], doc_id: str) -> float:
        tf = self.doc_tf[doc_id]
        dl = self.doc_len[doc_id]
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl) if self.avgdl else self.k1
        total = 0.0
        for term in query_tokens:
            f = tf.get(term, 0)
            if f == 0 or self.df.get(term, 0) == 0:
                continue
            total += self.idf(term) * f * (self.k1 + 1.0) / (f + norm)
        return total

    def scores(self, query_tokens: list[str]) -> dict[str, float]:
        return {d: self.score(query_tokens, d) for d in self.doc_tf}
