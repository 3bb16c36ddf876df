"""Automatic metrics: embedding cosine, query-token overlap, corpus BLEU.

Per-record scores that cannot be computed (no in-table tokens, empty query)
are skipped and counted rather than folded into the averages.  Reported
values are multiplied by 100.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import Triplet, tokenize
from .embeddings import EmbeddingTable, cosine


def semantic_score(
    tip_tokens: Sequence[str],
    query_tokens: Sequence[str],
    table: EmbeddingTable,
) -> float | None:
    """Cosine between max-pooled tip and query embeddings.

    Out-of-table tokens are skipped inside the pooling; None marks a record
    where either side has no in-table token at all.  A pooled zero vector
    scores 0 by the cosine convention.
    """
    tip_vec = table.pool(tip_tokens)
    query_vec = table.pool(query_tokens)
    if tip_vec is None or query_vec is None:
        return None
    return cosine(tip_vec, query_vec)


def lexicon_score(
    tip_tokens: Sequence[str],
    query_tokens: Sequence[str],
    multiset: bool = False,
) -> float | None:
    """Co-occurring query tokens over the raw query length K.

    The default counts distinct query tokens present in the tip, so the score
    stays in [0, 1]; ``multiset`` switches the numerator to the multiset
    intersection size.  K = 0 has no defined score and returns None.
    """
    k = len(query_tokens)
    if k == 0:
        return None
    if multiset:
        tip_counts = Counter(tip_tokens)
        query_counts = Counter(query_tokens)
        hits = sum(min(c, tip_counts.get(t, 0)) for t, c in query_counts.items())
    else:
        tip_set = set(tip_tokens)
        hits = len(set(query_tokens) & tip_set)
    return hits / k


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_corpus(
    hypotheses: Sequence[Sequence[str]],
    references: Sequence[Sequence[str]],
    max_order: int = 4,
) -> float:
    """Corpus-level BLEU with uniform weights and brevity penalty, in [0, 1].

    Clipped n-gram matches and candidate counts are pooled over the corpus;
    any order whose pooled match count is zero is smoothed add-one.  A corpus
    of perfect copies scores exactly 1.0.
    """
    if len(hypotheses) != len(references):
        raise ValueError(
            f"{len(hypotheses)} hypotheses but {len(references)} references"
        )
    if not hypotheses:
        raise ValueError("empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_order + 1):
            hyp_counts = _ngram_counts(hyp, n)
            if not hyp_counts:
                continue
            ref_counts = _ngram_counts(ref, n)
            totals[n - 1] += sum(hyp_counts.values())
            matches[n - 1] += sum(
                min(c, ref_counts.get(g, 0)) for g, c in hyp_counts.items()
            )
    if hyp_len == 0:
        return 0.0
    log_precision = 0.0
    for m, t in zip(matches, totals):
        if m == 0:
            p = (m + 1) / (t + 1)
        else:
            p = m / t
        log_precision += math.log(p) / max_order
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_precision)


@dataclass(frozen=True)
class MetricReport:
    """Run-level metrics, all multiplied by 100; None marks an omitted metric."""

    semantic: float | None
    lexicon: float
    bleu: float
    evaluated: int
    skipped: dict[str, int] = field(compare=False)

    def to_dict(self) -> dict:
        return {
            "semantic": self.semantic,
            "lexicon": self.lexicon,
            "bleu": self.bleu,
            "evaluated": self.evaluated,
            "skipped": dict(self.skipped),
        }

    def format_table(self) -> str:
        def cell(value):
            return "-" if value is None else f"{value:.2f}"

        header = f"{'Semantic':>10} {'Lexicon':>10} {'BLEU':>10}"
        row = f"{cell(self.semantic):>10} {cell(self.lexicon):>10} {cell(self.bleu):>10}"
        return header + "\n" + row


def evaluate_run(
    generated: Sequence[Mapping],
    triplets: Sequence[Triplet],
    table: EmbeddingTable | None = None,
    multiset_lexicon: bool = False,
    mode: str = "whitespace",
) -> MetricReport:
    """Score a generated run against its reference dataset.

    ``generated`` rows carry "id" and "tip" and must align one-to-one, in
    order, with ``triplets``.  Without an embedding table the semantic column
    is omitted.
    """
    if len(generated) != len(triplets):
        raise ValueError(
            f"{len(generated)} generated records but {len(triplets)} references"
        )
    semantic_vals: list[float] = []
    lexicon_vals: list[float] = []
    hyps: list[list[str]] = []
    refs: list[list[str]] = []
    skipped = {"semantic": 0, "lexicon": 0}
    for pos, (row, triplet) in enumerate(zip(generated, triplets)):
        if triplet.record_id is not None and str(row["id"]) != str(triplet.record_id):
            raise ValueError(
                f"record {pos}: generated id {row['id']!r} does not match "
                f"dataset id {triplet.record_id!r}"
            )
        tip_tokens = tokenize(row["tip"], mode)
        query_tokens = tokenize(triplet.raw_query, mode)
        hyps.append(tip_tokens)
        refs.append(tokenize(triplet.raw_tip, mode))
        if table is not None:
            sem = semantic_score(tip_tokens, query_tokens, table)
            if sem is None:
                skipped["semantic"] += 1
            else:
                semantic_vals.append(sem)
        lex = lexicon_score(tip_tokens, query_tokens, multiset=multiset_lexicon)
        if lex is None:
            skipped["lexicon"] += 1
        else:
            lexicon_vals.append(lex)
    bleu = bleu_corpus(hyps, refs) if hyps else 0.0
    if table is None:
        semantic = None
    elif semantic_vals:
        semantic = 100.0 * sum(semantic_vals) / len(semantic_vals)
    else:
        semantic = 0.0
    lexicon = 100.0 * sum(lexicon_vals) / len(lexicon_vals) if lexicon_vals else 0.0
    return MetricReport(
        semantic=semantic,
        lexicon=lexicon,
        bleu=100.0 * bleu,
        evaluated=len(triplets),
        skipped=skipped,
    )
