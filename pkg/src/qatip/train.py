"""Teacher-forced training with per-epoch logging and checkpointing.

Each epoch reshuffles with a seed derived from (base seed + epoch), so a
(seed, config, data) triple fully determines every logged loss.  The best
validation model and the final model are both written as checkpoints.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass

from .checkpoint import save_checkpoint
from .config import RunConfig
from .corpus import make_batches
from .optim import Adam, clip_global_norm
from .tensor import backward, no_grad


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    valid_loss: float
    seconds: float

    def record(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "train_loss": round(self.train_loss, 6),
                "valid_loss": round(self.valid_loss, 6),
                "seconds": round(self.seconds, 3),
            }
        )


@dataclass
class TrainResult:
    history: list
    best_epoch: int
    best_valid: float
    best_path: str | None
    final_path: str | None


def mean_loss(model, batches) -> float:
    """Per-sequence mean loss over ``batches`` without building graphs."""
    total = 0.0
    count = 0
    with no_grad():
        for batch in batches:
            loss = model.forward_loss(batch, train=False)
            total += float(loss.data) * batch.size
            count += batch.size
    return total / max(1, count)


def train_model(
    model,
    train_triplets,
    valid_triplets,
    config: RunConfig,
    out_dir: str | None = None,
    log=None,
) -> TrainResult:
    params = model.params.parameters()
    optimizer = Adam(params, lr=config.lr)
    snapshot = {**model.config_dict(), "run": config.to_dict()}
    best_path = final_path = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        best_path = os.path.join(out_dir, "best.qtip")
        final_path = os.path.join(out_dir, "final.qtip")
    valid_batches = make_batches(valid_triplets, config.batch_size)
    history: list[EpochStats] = []
    best_valid = math.inf
    best_epoch = -1
    for epoch in range(config.epochs):
        started = time.perf_counter()
        batches = make_batches(
            train_triplets, config.batch_size, shuffle_seed=config.seed + epoch
        )
        total = 0.0
        count = 0
        for batch in batches:
            optimizer.zero_grad()
            loss = model.forward_loss(batch, train=True)
            backward(loss)
            clip_global_norm(params, config.grad_clip)
            optimizer.step()
            total += float(loss.data) * batch.size
            count += batch.size
        stats = EpochStats(
            epoch=epoch,
            train_loss=total / max(1, count),
            valid_loss=mean_loss(model, valid_batches),
            seconds=time.perf_counter() - started,
        )
        history.append(stats)
        if log is not None:
            log(stats)
        if stats.valid_loss < best_valid:
            best_valid = stats.valid_loss
            best_epoch = epoch
            if best_path:
                save_checkpoint(model, snapshot, best_path)
    if final_path:
        save_checkpoint(model, snapshot, final_path)
    if best_path and best_epoch < 0:
        # zero-epoch run: the initialized model is also the best seen
        save_checkpoint(model, snapshot, best_path)
    return TrainResult(
        history=history,
        best_epoch=best_epoch,
        best_valid=best_valid,
        best_path=best_path,
        final_path=final_path,
    )
