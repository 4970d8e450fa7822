"""Mini-batch Adam training with seeded shuffling, per-epoch trace rows, and
best-dev parameter snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import ModelConfig
from .data import ClaimInstance, Vocab, build_vocab, encode_batch
from .metrics import evaluate
from .model import DualViewModel
from .optim import Adam
from .tensor import backward, mul, tsum, concat, reshape
from .tensor import Tensor


@dataclass
class TrainResult:
    model: DualViewModel
    trace: list[dict]
    best_state: dict[str, np.ndarray]
    final_state: dict[str, np.ndarray]
    best_epoch: int
    best_dev_micro_f1: float


def split_dev(corpus: list[ClaimInstance], cfg: ModelConfig
              ) -> tuple[list[ClaimInstance], list[ClaimInstance]]:
    """Deterministic seeded holdout split used when no dev file is given."""
    rng = np.random.default_rng([cfg.seed, 0xDE])
    order = rng.permutation(len(corpus))
    n_dev = max(1, int(round(len(corpus) * cfg.dev_fraction)))
    if n_dev >= len(corpus):
        n_dev = len(corpus) - 1
    dev_idx = set(order[:n_dev].tolist())
    train = [corpus[i] for i in range(len(corpus)) if i not in dev_idx]
    dev = [corpus[i] for i in range(len(corpus)) if i in dev_idx]
    return train, dev


def train_model(train_set: list[ClaimInstance], dev_set: list[ClaimInstance],
                cfg: ModelConfig, *, vocab: Optional[Vocab] = None,
                on_epoch: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Train from scratch; deterministic given config and seed.

    Records one trace row per epoch (mean losses over training batches plus
    dev metrics), snapshots the best-dev parameters, and optionally stops
    early once dev micro-F1 reaches ``early_stop_dev_f1``.
    """
    cfg.validate()
    if vocab is None:
        vocab = build_vocab(train_set, cfg.min_freq)
    init_rng = np.random.default_rng(cfg.seed)
    model = DualViewModel.build(cfg, vocab, init_rng)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    dropout_rng = np.random.default_rng([cfg.seed, 2])

    train_batch = encode_batch(train_set, vocab, cfg)
    dev_batch = encode_batch(dev_set, vocab, cfg)

    adam = Adam(model.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2)
    model.params.zero_grads()

    trace: list[dict] = []
    best_state = model.params.state_dict()
    best_epoch = 0
    best_dev = -1.0

    n = len(train_batch)
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        sum_total = 0.0
        sum_ce = 0.0
        sum_in = 0.0
        for start in range(0, n, cfg.batch_size):
            chunk = order[start:start + cfg.batch_size]
            losses: list[Tensor] = []
            for bi in chunk:
                pred = model.forward(
                    train_batch.claim_ids[bi], train_batch.claim_mask[bi],
                    train_batch.article_ids[bi], train_batch.article_mask[bi],
                    int(train_batch.article_count[bi]), int(train_batch.labels[bi]),
                    train=True, rng=dropout_rng)
                losses.append(pred.total)
                sum_total += pred.total.item()
                sum_ce += pred.cross_entropy.item()
                if pred.inconsistency is not None:
                    sum_in += pred.inconsistency.item()
            stacked = losses[0] if len(losses) == 1 else tsum(
                concat([reshape(t, (1, 1)) for t in losses], axis=0))
            batch_loss = mul(stacked, 1.0 / len(chunk))
            backward(batch_loss)
            adam.step()

        dev_metrics = evaluate(model, dev_batch)
        row = {
            "epoch": epoch,
            "mean_loss": sum_total / n,
            "mean_cross_entropy": sum_ce / n,
            "mean_inconsistency": sum_in / n,
            "dev_micro_f1": dev_metrics["micro_f1"],
            "dev_macro_f1": dev_metrics["macro_f1"],
        }
        trace.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if dev_metrics["micro_f1"] > best_dev:
            best_dev = dev_metrics["micro_f1"]
            best_epoch = epoch
            best_state = model.params.state_dict()
        if cfg.early_stop_dev_f1 is not None and best_dev >= cfg.early_stop_dev_f1:
            break

    return TrainResult(model=model, trace=trace, best_state=best_state,
                       final_state=model.params.state_dict(),
                       best_epoch=best_epoch, best_dev_micro_f1=best_dev)
