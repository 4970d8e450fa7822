"""Shared fixtures: micro-scale corpora, configs, and models."""

from __future__ import annotations

import numpy as np
import pytest

from cicd.config import ModelConfig, config_from_dict
from cicd.data import ClaimInstance, build_vocab, encode_batch
from cicd.model import DualViewModel

MICRO_KW = dict(d=8, d_h=4, p=4, l=6, k=2, o=4, n_classes=2,
                label_names=["true", "false"], dropout=0.0, min_freq=1)


def make_micro_config(**overrides) -> ModelConfig:
    kw = dict(MICRO_KW)
    kw.update(overrides)
    return config_from_dict(kw)


def make_corpus(seed: int = 5, n: int = 4, n_words: int = 9,
                n_articles=(3, 2, 1, 4)) -> list[ClaimInstance]:
    words = [f"w{i}" for i in range(n_words)]
    rng = np.random.default_rng(seed)

    def text(lo, hi):
        return " ".join(rng.choice(words, size=int(rng.integers(lo, hi + 1))))

    out = []
    for i in range(n):
        arts = [text(3, 6) for _ in range(n_articles[i % len(n_articles)])]
        out.append(ClaimInstance(f"inst{i}", text(2, 4), arts, i % 2))
    return out


@pytest.fixture
def micro_model():
    cfg = make_micro_config()
    corpus = make_corpus()
    vocab = build_vocab(corpus)
    model = DualViewModel.build(cfg, vocab, np.random.default_rng(11))
    batch = encode_batch(corpus, vocab, cfg)
    return model, batch, corpus


def instance_args(batch, bi: int):
    return (batch.claim_ids[bi], batch.claim_mask[bi], batch.article_ids[bi],
            batch.article_mask[bi], int(batch.article_count[bi]),
            int(batch.labels[bi]))
