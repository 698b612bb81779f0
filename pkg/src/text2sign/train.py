from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numerics as nx
from .corpus import EncodedSample, make_batches
from .model import ContextualEmbeddings, Transformer

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 100
    max_steps: int | None = None
    patience: int = 5
    seed: int = 0


@dataclass
class TrainResult:
    log: list[dict] = field(default_factory=list)
    steps: int = 0
    best_epoch: int = 0
    best_dev_loss: float = math.inf
    stopped_early: bool = False


def evaluate_loss(model: Transformer, samples: Sequence[EncodedSample], batch_size: int,
                  contextual: ContextualEmbeddings | None = None) -> float:
    """Token-weighted mean translation loss, no dropout."""
    model.training = False
    total = 0.0
    tokens = 0
    with nx.no_grad():
        for batch in make_batches(samples, batch_size, seed=None):
            n = int(batch.tgt_mask.sum())
            total += model.loss(batch, contextual).translation.item() * n
            tokens += n
    return total / max(tokens, 1)


def train(
    model: Transformer,
    train_samples: Sequence[EncodedSample],
    cfg: TrainConfig,
    dev_samples: Sequence[EncodedSample] = (),
    out_dir: str | Path | None = None,
    contextual: ContextualEmbeddings | None = None,
    meta: dict | None = None,
) -> TrainResult:
    """Adam over shuffled batches with per-epoch checkpoints.

    Stops after ``cfg.epochs``, after ``cfg.max_steps`` updates, or when the
    dev loss has not improved for ``cfg.patience`` epochs.
    """
    state = nx.AdamState(lr=cfg.lr)
    result = TrainResult()
    out = Path(out_dir) if out_dir is not None else None
    bad_epochs = 0
    for epoch in range(1, cfg.epochs + 1):
        model.training = True
        sums = np.zeros(3)
        n_batches = 0
        for batch in make_batches(train_samples, cfg.batch_size, seed=cfg.seed * 100003 + epoch):
            if cfg.max_steps is not None and result.steps >= cfg.max_steps:
                break
            nx.zero_grads(model.params)
            loss = model.loss(batch, contextual)
            values = loss.values
            if not all(math.isfinite(v) for v in values):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {result.steps + 1}: "
                    f"total={values[0]} translation={values[1]} hand={values[2]}"
                )
            loss.total.backward()
            nx.adam_step(state, model.params)
            result.steps += 1
            sums += values
            n_batches += 1
        if n_batches == 0:
            break
        record = {
            "epoch": epoch,
            "steps": result.steps,
            "train_loss": sums[0] / n_batches,
            "train_translation": sums[1] / n_batches,
            "train_hand": sums[2] / n_batches,
        }
        improved = True
        if dev_samples:
            dev = evaluate_loss(model, dev_samples, cfg.batch_size, contextual)
            record["dev_loss"] = dev
            improved = dev < result.best_dev_loss
            if improved:
                result.best_dev_loss = dev
        if improved:
            result.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
        result.log.append(record)
        log.info("epoch %d: %s", epoch, {k: round(v, 4) if isinstance(v, float) else v for k, v in record.items()})
        if out is not None:
            ckpt_meta = dict(meta or {}, epoch=epoch, steps=result.steps)
            model.save(out / "checkpoint_last.bin", ckpt_meta)
            if improved:
                model.save(out / "checkpoint_best.bin", ckpt_meta)
        if dev_samples and bad_epochs >= cfg.patience:
            result.stopped_early = True
            break
        if cfg.max_steps is not None and result.steps >= cfg.max_steps:
            break
    model.training = False
    return result
