"""Scoring generated tips: semantic, lexicon, and corpus BLEU."""

import numpy as np

from qatip.corpus import Triplet
from qatip.embeddings import EmbeddingTable
from qatip.evaluation import bleu_corpus, evaluate_run, lexicon_score, semantic_score

table = EmbeddingTable(
    {
        "cake": np.array([1.0, 0.0, 0.2]),
        "dessert": np.array([0.9, 0.1, 0.3]),
        "tea": np.array([0.0, 1.0, 0.0]),
        "slow": np.array([-0.5, 0.2, 0.8]),
    },
    dim=3,
)

# semantic: cosine of max-pooled embeddings, out-of-table tokens skipped
print("semantic cake~dessert:",
      round(semantic_score(["the", "cake"], ["dessert"], table), 4))
print("semantic cake~slow   :",
      round(semantic_score(["the", "cake"], ["slow"], table), 4))
print("all tokens unknown -> None:",
      semantic_score(["xyzzy"], ["dessert"], table))

# lexicon: distinct query tokens that made it into the tip, over query length
print("\nlexicon 2 of 3 query tokens present:",
      round(lexicon_score(["good", "cake", "tea"], ["cake", "tea", "price"]), 4))
print("lexicon multiset counts repeats:",
      round(lexicon_score(["cake"], ["cake", "cake", "tea"], multiset=True), 4))

# corpus BLEU with add-one smoothing only where an order has zero matches
hyps = [["the", "cake", "was", "good"], ["tea", "time"]]
refs = [["the", "cake", "was", "great"], ["tea", "time"]]
print("\ncorpus bleu:", round(bleu_corpus(hyps, refs), 4))
print("identical corpus is exactly 1.0:", bleu_corpus(refs, refs) == 1.0)

# evaluate_run aligns generated rows with references and scales by 100
triplets = [
    Triplet((), (), (), "unused", "cake tea", "the cake was great", "r0"),
    Triplet((), (), (), "unused", "tea", "tea time", "r1"),
]
generated = [
    {"id": "r0", "tip": "the cake was good"},
    {"id": "r1", "tip": "tea time"},
]
report = evaluate_run(generated, triplets, table)
print("\n" + report.format_table())
print(report.to_dict())
