"""Greedy and beam-search decoding over any model exposing the step protocol.

A model provides ``prepare(review_ids, query_ids) -> ctx`` and
``step_logits(ctx, prefix_ids) -> (V,) ndarray``; each step recomputes from
the full prefix, so no incremental state is cached between calls.

Scoring conventions (mirrored exactly by the test oracles):
  - per-step distribution = log-softmax over logits after masking banned
    tokens (UNK by default) to -inf; banned tokens are never expanded
  - a hypothesis finishes by choosing EOS (its log-prob includes the EOS
    term) or by reaching ``max_len`` surface tokens (no EOS term)
  - ranking uses score / max(1, surface_len)^alpha, ties broken by shorter
    surface, then lexicographically smaller surface ids
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import BOS_ID, EOS_ID, UNK_ID, Vocabulary, detokenize


@dataclass(frozen=True)
class Hypothesis:
    ids: tuple  # BOS-prefixed; ends with EOS when finished that way
    log_prob: float
    finished: bool

    @property
    def surface(self) -> tuple:
        core = self.ids[1:]
        if core and core[-1] == EOS_ID:
            core = core[:-1]
        return core

    def normalized(self, alpha: float) -> float:
        if alpha == 0.0:
            return self.log_prob
        return self.log_prob / (max(1, len(self.surface)) ** alpha)


@dataclass
class BeamConfig:
    max_len: int
    width: int = 4
    alpha: float = 0.0
    ban_tokens: tuple = (UNK_ID,)

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("beam width must be >= 1")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


def step_log_probs(model, ctx, prefix_ids, ban_tokens=(UNK_ID,)) -> np.ndarray:
    """Masked log-softmax over the next-token logits for a prefix."""
    logits = np.asarray(model.step_logits(ctx, prefix_ids), dtype=np.float64).copy()
    for tok in ban_tokens:
        logits[tok] = -np.inf
    mx = logits.max()
    lse = mx + np.log(np.exp(logits - mx).sum())
    return logits - lse


def rank_key(hyp: Hypothesis, alpha: float):
    return (-hyp.normalized(alpha), len(hyp.surface), hyp.surface)


def greedy_decode(model, review_ids, query_ids, max_len: int, ban_tokens=(UNK_ID,)) -> tuple:
    """Argmax decoding; ties go to the lowest token id.  Returns surface ids."""
    ctx = model.prepare(review_ids, query_ids)
    ids = (BOS_ID,)
    while len(ids) - 1 < max_len:
        log_probs = step_log_probs(model, ctx, ids, ban_tokens)
        tok = int(np.argmax(log_probs))
        if tok == EOS_ID:
            break
        ids = ids + (tok,)
    return ids[1:]


def beam_search(model, review_ids, query_ids, config: BeamConfig) -> list[Hypothesis]:
    """Width-limited best-first expansion with a finished pool.

    Every live hypothesis is expanded over the full vocabulary each step;
    the top ``width`` candidates survive, finished ones retiring to the
    pool.  Returns pool and remaining live hypotheses ranked best-first.
    """
    ctx = model.prepare(review_ids, query_ids)
    live = [Hypothesis(ids=(BOS_ID,), log_prob=0.0, finished=False)]
    pool: list[Hypothesis] = []
    while live:
        candidates = []
        for hyp in live:
            log_probs = step_log_probs(model, ctx, hyp.ids, config.ban_tokens)
            for tok, lp in enumerate(log_probs):
                if lp == -np.inf:
                    continue
                ids = hyp.ids + (int(tok),)
                score = hyp.log_prob + float(lp)
                if tok == EOS_ID:
                    candidates.append(Hypothesis(ids, score, True))
                elif len(ids) - 1 >= config.max_len:
                    candidates.append(Hypothesis(ids, score, True))
                else:
                    candidates.append(Hypothesis(ids, score, False))
        candidates.sort(key=lambda h: rank_key(h, config.alpha))
        live = []
        for hyp in candidates[: config.width]:
            (pool if hyp.finished else live).append(hyp)
    return sorted(pool, key=lambda h: rank_key(h, config.alpha))


def rescore(model, review_ids, query_ids, hyp: Hypothesis, ban_tokens=(UNK_ID,)) -> float:
    """Independent re-evaluation of a hypothesis's stored log-probability."""
    ctx = model.prepare(review_ids, query_ids)
    total = 0.0
    for t in range(1, len(hyp.ids)):
        log_probs = step_log_probs(model, ctx, hyp.ids[:t], ban_tokens)
        total += float(log_probs[hyp.ids[t]])
    return total


@dataclass
class GenerationResult:
    record_id: str
    tip: str | None
    error: str | None = None
    score: float = 0.0
    token_ids: tuple = field(default_factory=tuple)


def batch_generate(model, triplets, config: BeamConfig, vocab: Vocabulary,
                   mode: str = "whitespace") -> list[GenerationResult]:
    """Decode a dataset in order; per-record failures are reported, not fatal."""
    results = []
    for idx, trip in enumerate(triplets):
        rid = trip.record_id or str(idx)
        try:
            best = beam_search(model, trip.review_ids, trip.query_ids, config)[0]
            text = detokenize(vocab.decode(best.surface), mode)
            results.append(GenerationResult(rid, text, score=best.log_prob,
                                            token_ids=tuple(best.surface)))
        except Exception as exc:  # keep the run alive, surface the failure
            results.append(GenerationResult(rid, None, error=f"record {idx} ({rid}): {exc}"))
    return results
