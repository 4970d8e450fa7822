"""Dual-view classification: fuse global and local evidence, cross-entropy
over the fused softmax, KL inconsistency between the two evidence views, and
the weighted joint objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ced, isi
from .config import ModelConfig
from .data import Vocab
from .errors import WidthMismatch
from .params import ParamSet, build_params
from .tensor import (EPS, Tensor, add, concat, dropout, log, masked_softmax,
                     matmul, mul, narrow, neg, no_grad, reshape, sub, tsum)


def inconsistency_loss(global_flat: Tensor, local_flat: Tensor) -> Tensor:
    """KL divergence between the softmax-normalized flat evidence vectors.

    Both inputs are [1, K] with equal K; logs and ratios carry the 1e-12
    floor, so the result is >= -1e-9 and 0 when the inputs coincide.
    """
    if global_flat.data.shape != local_flat.data.shape:
        raise WidthMismatch(
            f"evidence widths differ: {global_flat.data.shape} vs "
            f"{local_flat.data.shape}; set o == 2k or enable projection_mode")
    g_dist = masked_softmax(global_flat, axis=1)
    i_dist = masked_softmax(local_flat, axis=1)
    return tsum(mul(g_dist, sub(log(g_dist, EPS), log(i_dist, EPS))))


def classify(features: Tensor, params: ParamSet,
             label: Optional[int] = None) -> tuple[Tensor, Optional[Tensor]]:
    """Softmax over fused evidence; returns (probs [1, C], cross-entropy)."""
    logits = add(matmul(features, params["classify_w"], tb=True), params["classify_b"])
    probs = masked_softmax(logits, axis=1)
    ce = None
    if label is not None:
        ce = neg(tsum(log(narrow(probs, 1, int(label), 1), EPS)))
    return probs, ce


def total_loss(ce: Tensor, loss_in: Optional[Tensor], alpha: float) -> Tensor:
    """Joint objective: cross-entropy plus alpha-weighted inconsistency."""
    if loss_in is None or alpha == 0.0:
        return ce
    return add(ce, mul(loss_in, alpha))


@dataclass
class Prediction:
    probs: np.ndarray                 # [n_classes]
    predicted: int
    cross_entropy: Optional[Tensor]
    inconsistency: Optional[Tensor]
    total: Optional[Tensor]
    global_evidence: Optional[ced.GlobalEvidence]
    local_evidence: Optional[isi.LocalEvidence]


class DualViewModel:
    """Holds the config, parameters and vocabulary; runs one instance at a
    time (training batches average per-instance losses)."""

    def __init__(self, cfg: ModelConfig, params: ParamSet, vocab: Vocab):
        cfg.validate()
        if cfg.vocab_size != len(vocab):
            raise WidthMismatch(
                f"config vocab_size {cfg.vocab_size} != vocabulary size {len(vocab)}")
        self.cfg = cfg
        self.params = params
        self.vocab = vocab

    @classmethod
    def build(cls, cfg: ModelConfig, vocab: Vocab,
              rng: Optional[np.random.Generator] = None) -> "DualViewModel":
        cfg.vocab_size = len(vocab)
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        return cls(cfg, build_params(cfg, rng), vocab)

    def forward(self, claim_ids: np.ndarray, claim_mask: np.ndarray,
                article_ids: np.ndarray, article_mask: np.ndarray,
                n_articles: int, label: Optional[int] = None, *,
                train: bool = False, rng: Optional[np.random.Generator] = None,
                collect_diag: bool = False) -> Prediction:
        cfg = self.cfg
        params = self.params
        article_ids = article_ids[:n_articles]
        article_mask = article_mask[:n_articles]

        article_embs = [ced.embed_tokens(params, article_ids[i], cfg, train, rng)
                        for i in range(n_articles)]
        claim_states = ced.encode_bilstm(claim_ids, claim_mask, params, "claim_enc",
                                         cfg, train=train, rng=rng)

        global_ev = None
        global_flat = None
        if not cfg.no_ced:
            memory = ced.build_memory(article_embs, article_mask, claim_states,
                                      claim_mask, params, cfg)
            global_ev = ced.decode_global(memory, params, cfg, train=train, rng=rng,
                                          collect_diag=collect_diag)
            global_flat = reshape(global_ev.g, (1, cfg.global_width))

        local_ev = None
        local_flat = None
        if not cfg.no_isi:
            sent_reps, _valid = isi.sentence_reps(article_embs, article_mask, params, cfg)
            selection = None
            if cfg.no_selection:
                chosen = list(range(n_articles))
            else:
                sim = isi.difference_matrix(sent_reps, params)
                selection = isi.select_topk(sim.data, cfg.k)
                chosen = selection.chosen
            fragments = []
            claim_attn: list[np.ndarray] = []
            art_attn: list[np.ndarray] = []
            for i in chosen:
                rep = narrow(sent_reps, 0, i, 1)
                if cfg.no_interaction:
                    frag = isi.concat_fragment(rep, claim_states, claim_mask)
                else:
                    frag, w_claim, w_art = isi.co_interact(rep, claim_states, claim_mask)
                    claim_attn.append(w_claim)
                    art_attn.append(w_art)
                if train and cfg.dropout > 0:
                    frag = dropout(frag, cfg.dropout, rng)
                fragments.append(frag)
            if cfg.no_selection:
                local_flat = isi.mean_fragments(fragments, cfg)
            else:
                local_flat = isi.local_evidence(fragments, chosen, cfg)
            local_ev = isi.LocalEvidence(flat=local_flat, chosen=chosen,
                                         selection=selection,
                                         claim_attention=claim_attn,
                                         article_attention=art_attn)

        features = global_flat if local_flat is None else (
            local_flat if global_flat is None else
            concat([global_flat, local_flat], axis=1))
        probs, ce = classify(features, params, label)

        loss_in = None
        if cfg.uses_inconsistency():
            g_side, i_side = global_flat, local_flat
            if cfg.projection_mode:
                g_side = matmul(g_side, params["proj_global_w"], tb=True)
                i_side = matmul(i_side, params["proj_local_w"], tb=True)
            loss_in = inconsistency_loss(g_side, i_side)

        total = total_loss(ce, loss_in, cfg.alpha) if ce is not None else None
        probs_np = probs.data[0].copy()
        return Prediction(probs=probs_np, predicted=int(np.argmax(probs_np)),
                          cross_entropy=ce, inconsistency=loss_in, total=total,
                          global_evidence=global_ev, local_evidence=local_ev)

    def predict_batch(self, batch, indices=None) -> list[Prediction]:
        """Forward a batch without gradients or dropout."""
        if indices is None:
            indices = range(len(batch))
        preds = []
        with no_grad():
            for bi in indices:
                preds.append(self.forward(
                    batch.claim_ids[bi], batch.claim_mask[bi],
                    batch.article_ids[bi], batch.article_mask[bi],
                    int(batch.article_count[bi]), int(batch.labels[bi])))
        return preds
