"""Train a small model until it memorizes, then decode greedily and with beams."""

import numpy as np

from qatip.checkpoint import load_checkpoint, save_checkpoint
from qatip.corpus import detokenize, encode_records, make_batches, vocab_from_records
from qatip.generation import BeamConfig, beam_search, greedy_decode
from qatip.optim import Adam, clip_global_norm
from qatip.synthetic import overfit_corpus
from qatip.tensor import backward
from qatip.train import mean_loss
from qatip.transformer import QaTransformerModel, TransformerConfig

records = overfit_corpus(n=32, seed=13)
vocab = vocab_from_records(records)
triplets = encode_records(records, vocab, review_max_len=12, query_max_len=3, tip_max_len=8)
print(f"{len(records)} records, vocabulary of {vocab.size} tokens")

config = TransformerConfig(
    vocab.size, model_dim=48, num_heads=4, num_layers=2,
    dropout=0.0, variant="both", max_len=32,
)
model = QaTransformerModel(config, seed=1)
params = model.params.parameters()
opt = Adam(params, lr=0.002)

for epoch in range(60):
    for batch in make_batches(triplets, 16, shuffle_seed=7 + epoch):
        opt.zero_grad()
        loss = model.forward_loss(batch, train=True)
        backward(loss)
        clip_global_norm(params, 5.0)
        opt.step()
    if epoch % 10 == 9:
        full = mean_loss(model, make_batches(triplets, 32))
        print(f"epoch {epoch:3d}  loss {full:.4f}")

# greedy decoding reproduces the memorized tips
hits = 0
for trip in triplets:
    ids = greedy_decode(model, trip.review_ids, trip.query_ids, max_len=8)
    hits += detokenize(vocab.decode(ids)) == trip.raw_tip
print(f"greedy reproduces {hits}/{len(triplets)} training tips")

# a wider beam returns ranked alternatives with log-probabilities
trip = triplets[0]
print("review:", trip.raw_review)
print("query :", trip.raw_query)
for hyp in beam_search(model, trip.review_ids, trip.query_ids,
                       BeamConfig(max_len=8, width=4)):
    text = detokenize(vocab.decode(hyp.surface))
    print(f"  {hyp.log_prob:8.3f}  {text!r}")

# the checkpoint round trip is exact: same bytes, same outputs
save_checkpoint(model, model.config_dict(), "/tmp/demo_model.qtip")
restored, snapshot = load_checkpoint("/tmp/demo_model.qtip")
save_checkpoint(restored, snapshot, "/tmp/demo_model_again.qtip")
same = open("/tmp/demo_model.qtip", "rb").read() == open("/tmp/demo_model_again.qtip", "rb").read()
print("checkpoint round trip byte-identical:", same)
again = greedy_decode(restored, trip.review_ids, trip.query_ids, max_len=8)
print("restored model decodes identically:",
      again == greedy_decode(model, trip.review_ids, trip.query_ids, max_len=8))
