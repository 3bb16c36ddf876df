"""Independent corpus-BLEU reference used to cross-check the library metric.

Deliberately structured differently from the library implementation: n-grams
are materialized via zip slices, per-order statistics live in parallel dicts,
and the geometric mean is taken as a product raised to 1/4.
"""

import math


def _grams(seq, n):
    return list(zip(*[seq[k:] for k in range(n)]))


def reference_bleu(cands, refs, orders=4):
    if len(cands) != len(refs):
        raise ValueError("length mismatch")
    if not cands:
        raise ValueError("no records")
    stats = {n: {"hit": 0, "total": 0} for n in range(1, orders + 1)}
    cand_tokens = 0
    ref_tokens = 0
    for cand, ref in zip(cands, refs):
        cand = list(cand)
        ref = list(ref)
        cand_tokens += len(cand)
        ref_tokens += len(ref)
        for n in range(1, orders + 1):
            seen = {}
            for g in _grams(ref, n):
                seen[g] = seen.get(g, 0) + 1
            for g in _grams(cand, n):
                stats[n]["total"] += 1
                if seen.get(g, 0) > 0:
                    seen[g] -= 1
                    stats[n]["hit"] += 1
    if cand_tokens == 0:
        return 0.0
    product = 1.0
    for n in range(1, orders + 1):
        hit = stats[n]["hit"]
        total = stats[n]["total"]
        if hit == 0:
            product *= (hit + 1.0) / (total + 1.0)
        else:
            product *= hit / total
    geo = product ** (1.0 / orders)
    if cand_tokens < ref_tokens:
        geo *= math.exp(1.0 - ref_tokens / cand_tokens)
    return geo
