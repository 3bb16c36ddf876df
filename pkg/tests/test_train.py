import json
import os

import numpy as np
import pytest

from qatip.checkpoint import load_checkpoint
from qatip.config import RunConfig, model_config_from_run
from qatip.corpus import Vocabulary, encode_records, vocab_from_records
from qatip.rnn import QaRnnModel
from qatip.synthetic import overfit_corpus
from qatip.train import EpochStats, mean_loss, train_model
from qatip.transformer import QaTransformerModel


def tiny_setup(arch="rnn", n=12, epochs=2, seed=5):
    records = overfit_corpus(n=n, seed=3)
    vocab = vocab_from_records(records)
    config = RunConfig(
        arch=arch, variant="both", epochs=epochs, seed=seed, batch_size=4,
        review_max_len=12, query_max_len=3, tip_max_len=8, dropout=0.0,
        model_dim=8, num_heads=2, num_layers=1, emb_dim=6, hidden_dim=4, lr=0.01,
    )
    triplets = encode_records(
        records, vocab,
        review_max_len=config.review_max_len,
        query_max_len=config.query_max_len,
        tip_max_len=config.tip_max_len,
    )
    model_cfg = model_config_from_run(config, vocab.size)
    model = (QaRnnModel if arch == "rnn" else QaTransformerModel)(model_cfg, seed=seed)
    return model, triplets, config, vocab


def test_loss_decreases_over_epochs():
    model, triplets, config, _ = tiny_setup(epochs=8)
    result = train_model(model, triplets, triplets, config)
    assert len(result.history) == 8
    assert result.history[-1].train_loss < result.history[0].train_loss


def test_determinism_same_seed():
    losses = []
    for _ in range(2):
        model, triplets, config, _ = tiny_setup(epochs=3, seed=7)
        result = train_model(model, triplets, triplets, config)
        losses.append([(s.train_loss, s.valid_loss) for s in result.history])
    assert losses[0] == losses[1]


def test_different_seed_differs():
    traces = []
    for seed in (1, 2):
        model, triplets, config, _ = tiny_setup(epochs=2, seed=seed)
        result = train_model(model, triplets, triplets, config)
        traces.append(result.history[-1].train_loss)
    assert traces[0] != traces[1]


def test_checkpoints_written(tmp_path):
    model, triplets, config, _ = tiny_setup(epochs=2)
    out = str(tmp_path / "run")
    result = train_model(model, triplets, triplets, config, out_dir=out)
    assert os.path.exists(result.best_path)
    assert os.path.exists(result.final_path)
    best, snapshot = load_checkpoint(result.best_path)
    assert snapshot["run"]["epochs"] == 2
    assert best.config.vocab_size == model.config.vocab_size


def test_zero_epochs_saves_initialized_checkpoint(tmp_path):
    model, triplets, config, _ = tiny_setup(epochs=0)
    init_params = {p.name: p.tensor.data.copy() for p in model.params.parameters()}
    out = str(tmp_path / "run")
    result = train_model(model, triplets, triplets, config, out_dir=out)
    assert result.history == []
    assert result.best_epoch == -1
    loaded, _ = load_checkpoint(result.final_path)
    for p in loaded.params.parameters():
        np.testing.assert_array_equal(p.tensor.data, init_params[p.name])
    assert os.path.exists(result.best_path)


def test_best_checkpoint_tracks_valid_loss(tmp_path):
    model, triplets, config, _ = tiny_setup(epochs=4)
    logged = []
    out = str(tmp_path / "run")
    result = train_model(
        model, triplets, triplets, config, out_dir=out, log=logged.append
    )
    assert len(logged) == 4
    best = min(range(4), key=lambda i: result.history[i].valid_loss)
    assert result.best_epoch == best
    assert result.best_valid == result.history[best].valid_loss


def test_epoch_record_format():
    stats = EpochStats(epoch=3, train_loss=1.25, valid_loss=1.5, seconds=0.75)
    rec = json.loads(stats.record())
    assert rec == {"epoch": 3, "train_loss": 1.25, "valid_loss": 1.5, "seconds": 0.75}


def test_mean_loss_matches_manual():
    model, triplets, config, _ = tiny_setup(epochs=0)
    from qatip.corpus import make_batches

    batches = make_batches(triplets, 4)
    got = mean_loss(model, batches)
    total = sum(float(model.forward_loss(b, train=False).data) * b.size for b in batches)
    assert got == pytest.approx(total / len(triplets), abs=1e-9)
