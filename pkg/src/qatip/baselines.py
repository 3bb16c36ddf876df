"""Query-aware extractive baselines: lead selection, BM25, embedding cosine.

All three return a verbatim sentence of the input review.  The candidate
pool for ranking is the sentence list of the single review under
consideration; document frequencies and average length are computed over
that pool.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import tokenize
from .embeddings import EmbeddingTable, cosine

SENTENCE_TERMINATORS = frozenset(".!?。！？；;")


def split_sentences(review: str) -> list[str]:
    """Split on sentence terminators, keeping each terminator run attached.

    Fragments are stripped of surrounding whitespace and dropped when empty;
    a review with no terminator comes back as a single sentence.
    """
    sentences: list[str] = []
    buf: list[str] = []
    i = 0
    n = len(review)
    while i < n:
        ch = review[i]
        buf.append(ch)
        if ch in SENTENCE_TERMINATORS:
            while i + 1 < n and review[i + 1] in SENTENCE_TERMINATORS:
                i += 1
                buf.append(review[i])
            frag = "".join(buf).strip()
            if frag:
                sentences.append(frag)
            buf = []
        i += 1
    frag = "".join(buf).strip()
    if frag:
        sentences.append(frag)
    return sentences


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class SentenceIndex:
    """Sentences of one review with the statistics BM25 needs."""

    sentences: tuple[str, ...]
    token_lists: tuple[tuple[str, ...], ...]
    doc_freq: dict[str, int] = field(compare=False)
    avgdl: float = 0.0

    @property
    def num_sentences(self) -> int:
        return len(self.sentences)


def build_sentence_index(review: str, mode: str = "whitespace") -> SentenceIndex:
    sentences = split_sentences(review)
    token_lists = tuple(tuple(tokenize(s, mode)) for s in sentences)
    doc_freq: Counter[str] = Counter()
    for tokens in token_lists:
        doc_freq.update(set(tokens))
    total = sum(len(t) for t in token_lists)
    avgdl = total / len(token_lists) if token_lists else 0.0
    return SentenceIndex(tuple(sentences), token_lists, dict(doc_freq), avgdl)


def bm25_score(
    sentence_tokens: Sequence[str],
    query_tokens: Sequence[str],
    index: SentenceIndex,
    params: Bm25Params = Bm25Params(),
) -> float:
    """Sum of saturated tf-idf contributions over the query tokens as given.

    IDF(q) = ln((N - df(q) + 0.5) / (df(q) + 0.5) + 1) with N and df taken
    from ``index``; terms absent from the sentence contribute 0.
    """
    if index.num_sentences == 0:
        raise ValueError("empty sentence collection")
    counts = Counter(sentence_tokens)
    length = len(sentence_tokens)
    score = 0.0
    for term in query_tokens:
        tf = counts.get(term, 0)
        if tf == 0:
            continue
        df = index.doc_freq.get(term, 0)
        idf = math.log((index.num_sentences - df + 0.5) / (df + 0.5) + 1.0)
        denom = tf + params.k1 * (1.0 - params.b + params.b * length / index.avgdl)
        score += idf * tf * (params.k1 + 1.0) / denom
    return score


def _contains_run(tokens: Sequence[str], needle: Sequence[str]) -> bool:
    k = len(needle)
    if k == 0 or k > len(tokens):
        return False
    needle = tuple(needle)
    return any(tuple(tokens[i : i + k]) == needle for i in range(len(tokens) - k + 1))


def query_lead(
    review: str, query: str, strict: bool = False, mode: str = "whitespace"
) -> str:
    """Earliest sentence containing the query; lead sentence as fallback.

    Tier 1 wants the full query token sequence contiguously; tier 2 accepts
    any single query token and is disabled under ``strict``; tier 3 is the
    first sentence.
    """
    sentences = split_sentences(review)
    if not sentences:
        raise ValueError("empty review")
    token_lists = [tokenize(s, mode) for s in sentences]
    query_tokens = tokenize(query, mode)
    if query_tokens:
        for sent, tokens in zip(sentences, token_lists):
            if _contains_run(tokens, query_tokens):
                return sent
        if not strict:
            want = set(query_tokens)
            for sent, tokens in zip(sentences, token_lists):
                if want.intersection(tokens):
                    return sent
    return sentences[0]


def extract_bm25(
    review: str,
    query: str,
    params: Bm25Params = Bm25Params(),
    mode: str = "whitespace",
) -> str:
    """Sentence with the highest BM25 score against the query, earliest on ties."""
    index = build_sentence_index(review, mode)
    if index.num_sentences == 0:
        raise ValueError("empty review")
    query_tokens = tokenize(query, mode)
    best = 0
    best_score = -math.inf
    for pos, tokens in enumerate(index.token_lists):
        score = bm25_score(tokens, query_tokens, index, params)
        if score > best_score:
            best, best_score = pos, score
    return index.sentences[best]


def extract_embed(
    review: str, query: str, table: EmbeddingTable, mode: str = "whitespace"
) -> str:
    """Sentence whose max-pooled embedding is most cosine-similar to the query's.

    Sentences with no in-table token score -1; an entirely out-of-table query
    or review falls back to the first sentence with a warning.
    """
    sentences = split_sentences(review)
    if not sentences:
        raise ValueError("empty review")
    query_vec = table.pool(tokenize(query, mode))
    if query_vec is None:
        warnings.warn("query has no in-table token, using lead sentence", stacklevel=2)
        return sentences[0]
    pools = [table.pool(tokenize(s, mode)) for s in sentences]
    if all(p is None for p in pools):
        warnings.warn("no sentence has an in-table token, using lead sentence", stacklevel=2)
        return sentences[0]
    best = 0
    best_score = -math.inf
    for pos, vec in enumerate(pools):
        score = -1.0 if vec is None else cosine(vec, query_vec)
        if score > best_score:
            best, best_score = pos, score
    return sentences[best]
