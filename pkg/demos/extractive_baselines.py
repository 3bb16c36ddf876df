"""The three extractive tip baselines on a hand-written review."""

import numpy as np

from qatip.baselines import (
    Bm25Params,
    bm25_score,
    build_sentence_index,
    extract_bm25,
    extract_embed,
    query_lead,
    split_sentences,
)
from qatip.embeddings import EmbeddingTable

review = ("fine place overall. the cheese cake was lovely! "
          "service a bit slow today. cake and tea for two is cheap.")
print("review:", review)
print("sentences:")
for s in split_sentences(review):
    print("  -", s)

# tiered lead selection: contiguous query > any shared token > first sentence
print("\nquery_lead('cheese cake') :", query_lead(review, "cheese cake"))
print("query_lead('cake price')  :", query_lead(review, "cake price"))
print("query_lead('parking')     :", query_lead(review, "parking"))
print("strict mode skips the shared-token tier:",
      query_lead(review, "cake price", strict=True))

# ranking by term weighting; every sentence is one document
index = build_sentence_index(review)
print("\nper-sentence scores for query 'cake':")
for sent, toks in zip(index.sentences, index.token_lists):
    score = bm25_score(toks, ["cake"], index, Bm25Params())
    print(f"  {score:6.3f}  {sent}")
print("extract_bm25 picks:", extract_bm25(review, "cake"))

# embedding route: cosine between max-pooled sentence and query vectors
words = sorted({t for toks in index.token_lists for t in toks} | {"price", "cost"})
rng = np.random.default_rng(5)
vecs = {w: rng.standard_normal(16) for w in words}
vecs["cheap"] = vecs["price"] * 0.9 + rng.standard_normal(16) * 0.1
table = EmbeddingTable(vecs, dim=16)
print("extract_embed for 'price':", extract_embed(review, "price", table))
