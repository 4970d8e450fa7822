"""Collective-cognition pathway: claim-guided encoding and the hierarchical
attention decoder that generates the global evidence sequence.

All sequence state rows are 2*d_h wide (forward and backward LSTM halves
concatenated). Articles are processed per instance; word-level memory is the
row-major stack of the N article state matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ModelConfig
from .params import ParamSet
from .tensor import (Tensor, add, concat, constant, dropout, masked_softmax,
                     matmul, mul, narrow, no_grad, reshape, rows, sigmoid,
                     tanh)

_zero_rows: dict[int, Tensor] = {}


def _zero_row(width: int) -> Tensor:
    t = _zero_rows.get(width)
    if t is None:
        t = constant(np.zeros((1, width)))
        _zero_rows[width] = t
    return t


def embed_tokens(params: ParamSet, ids: np.ndarray, cfg: ModelConfig,
                 train: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Embedding lookup with inverted dropout during training."""
    emb = rows(params["embedding"], ids)
    if train and cfg.dropout > 0:
        emb = dropout(emb, cfg.dropout, rng)
    return emb


def last_unmasked_index(mask: np.ndarray) -> int:
    """Index of the last True entry, or -1 when the mask is all False."""
    idx = np.flatnonzero(mask)
    return int(idx[-1]) if idx.size else -1


def _run_direction(xw: Tensor, wh: Tensor, mask: np.ndarray, hidden: int,
                   reverse: bool) -> list[Tensor]:
    """LSTM recurrence over the unpadded prefix; masked steps carry state
    through unchanged and emit zero rows."""
    seq_len = xw.data.shape[0]
    outs: list[Tensor] = [_zero_row(hidden)] * seq_len
    last = last_unmasked_index(mask)
    if last < 0:
        return outs
    positions = range(last, -1, -1) if reverse else range(last + 1)
    h = _zero_row(hidden)
    c = _zero_row(hidden)
    for t in positions:
        if not mask[t]:
            continue
        gates = add(narrow(xw, 0, t, 1), matmul(h, wh))
        i = sigmoid(narrow(gates, 1, 0, hidden))
        f = sigmoid(narrow(gates, 1, hidden, hidden))
        g = tanh(narrow(gates, 1, 2 * hidden, hidden))
        o = sigmoid(narrow(gates, 1, 3 * hidden, hidden))
        c = add(mul(f, c), mul(i, g))
        h = mul(o, tanh(c))
        outs[t] = h
    return outs


def encode_bilstm(ids: np.ndarray, mask: np.ndarray, params: ParamSet,
                  prefix: str, cfg: ModelConfig, *, train: bool = False,
                  rng: Optional[np.random.Generator] = None,
                  embedded: Optional[Tensor] = None) -> Tensor:
    """Bidirectional LSTM states [T, 2*d_h]; masked positions are zero rows."""
    emb = embedded if embedded is not None else embed_tokens(params, ids, cfg, train, rng)
    hidden = cfg.d_h
    fw = _run_direction(add(matmul(emb, params[f"{prefix}.fw.wx"]), params[f"{prefix}.fw.b"]),
                        params[f"{prefix}.fw.wh"], mask, hidden, reverse=False)
    bw = _run_direction(add(matmul(emb, params[f"{prefix}.bw.wx"]), params[f"{prefix}.bw.b"]),
                        params[f"{prefix}.bw.wh"], mask, hidden, reverse=True)
    return concat([concat(fw, axis=0), concat(bw, axis=0)], axis=1)


def sentence_state(states: Tensor, mask: np.ndarray, width: int) -> Tensor:
    """State row at the last unmasked position (zero row if none)."""
    idx = last_unmasked_index(mask)
    if idx < 0:
        return _zero_row(width)
    return narrow(states, 0, idx, 1)


def claim_match(word_states: Tensor, claim_states: Tensor, claim_mask: np.ndarray,
                match_w: Tensor) -> tuple[Tensor, Tensor]:
    """Aggregate claim states for every article word via bilinear attention.

    Returns (aggregated vectors [L, 2*d_h], attention weights [L, p]).
    """
    scores = matmul(matmul(word_states, match_w), claim_states, tb=True)
    weights = masked_softmax(scores, axis=1, mask=claim_mask[None, :])
    return matmul(weights, claim_states), weights


@dataclass
class EncodedMemory:
    word_states: Tensor        # [N*l, 2*d_h] claim-matched word memory
    word_mask: np.ndarray      # [N*l]
    sent_states: Tensor        # [N, 2*d_h] last-word state per article
    sent_mask: np.ndarray      # [N] articles with at least one real token
    claim_states: Tensor       # [p, 2*d_h]
    claim_mask: np.ndarray     # [p]
    matched: Optional[Tensor]  # [N*l, 2*d_h] aggregated claim vectors, or None
    n_articles: int
    art_len: int


def build_memory(article_embs: list[Tensor], article_mask: np.ndarray,
                 claim_states: Tensor, claim_mask: np.ndarray,
                 params: ParamSet, cfg: ModelConfig) -> EncodedMemory:
    """Encode articles, extract sentence-level states, apply claim matching.

    ``article_embs`` are the (already dropped-out) embedded article matrices so
    the ISI encoder can reuse them.
    """
    n = len(article_embs)
    width = cfg.state_width
    per_article = []
    sent_rows = []
    for i in range(n):
        states = encode_bilstm(None, article_mask[i], params, "article_enc", cfg,
                               embedded=article_embs[i])
        per_article.append(states)
        sent_rows.append(sentence_state(states, article_mask[i], width))
    word_states = per_article[0] if n == 1 else concat(per_article, axis=0)
    sent_states = sent_rows[0] if n == 1 else concat(sent_rows, axis=0)
    word_mask = article_mask.reshape(-1)
    matched = None
    if "match_w" in params:
        matched, _ = claim_match(word_states, claim_states, claim_mask, params["match_w"])
        keep = constant(word_mask.astype(float)[:, None])
        word_states = add(word_states, mul(matched, keep))
    return EncodedMemory(
        word_states=word_states, word_mask=word_mask,
        sent_states=sent_states, sent_mask=article_mask.any(axis=1),
        claim_states=claim_states, claim_mask=claim_mask,
        matched=matched, n_articles=n, art_len=article_mask.shape[1])


@dataclass
class GlobalEvidence:
    g: Tensor                    # [o, 2*d_h] generated representations
    gamma: np.ndarray            # [o, N, l] combined attention per step
    beta: np.ndarray             # [o, N] sentence attention per step
    top_words: Optional[list[list[int]]] = None  # per-step ranked vocab ids
    vocab_probs: Optional[np.ndarray] = None     # [o, V]


def _lstm_step(x: Tensor, h: Tensor, c: Tensor, params: ParamSet,
               hidden: int) -> tuple[Tensor, Tensor]:
    gates = add(add(matmul(x, params["decoder.wx"]), matmul(h, params["decoder.wh"])),
                params["decoder.b"])
    i = sigmoid(narrow(gates, 1, 0, hidden))
    f = sigmoid(narrow(gates, 1, hidden, hidden))
    g = tanh(narrow(gates, 1, 2 * hidden, hidden))
    o = sigmoid(narrow(gates, 1, 3 * hidden, hidden))
    c_new = add(mul(f, c), mul(i, g))
    return mul(o, tanh(c_new)), c_new


def _vocab_distribution(h_hat: Tensor, params: ParamSet) -> np.ndarray:
    """Diagnostic vocabulary distribution; output weights tied to embeddings."""
    with no_grad():
        x = h_hat
        if "vocab_bridge" in params:
            x = matmul(x, params["vocab_bridge"], tb=True)
        logits = add(matmul(x, params["embedding"], tb=True), params["vocab_b"])
        return masked_softmax(logits, axis=1).data[0].copy()


def decode_global(memory: EncodedMemory, params: ParamSet, cfg: ModelConfig, *,
                  train: bool = False, rng: Optional[np.random.Generator] = None,
                  collect_diag: bool = False) -> GlobalEvidence:
    """Run the o-step attention decoder over the memory bank.

    Word- and sentence-level scores for each step are merged into a single
    distribution over (article, word) pairs; with ``no_merge`` the two levels
    are normalized separately (two-stage attention) instead.
    """
    n, l = memory.n_articles, memory.art_len
    width = cfg.state_width
    valid_arts = memory.sent_mask
    word_mask_col = memory.word_mask[:, None]

    # mean of valid sentence rows -> initial decoder state
    weights = valid_arts.astype(float)
    total = weights.sum()
    if total > 0:
        weights = weights / total
    h = tanh(add(matmul(constant(weights[None, :]), memory.sent_states) @ params["decoder.init_w"],
                 params["decoder.init_b"]))
    c = _zero_row(width)
    x = params["decoder.start"]

    expand = None
    if "sent_score_w" in params:
        expand = constant(np.repeat(np.eye(n), l, axis=0))  # [N*l, N]

    g_rows: list[Tensor] = []
    gamma = np.zeros((cfg.o, n, l))
    beta = np.zeros((cfg.o, n))
    top_words: list[list[int]] = []
    vocab_probs = np.zeros((cfg.o, cfg.vocab_size)) if collect_diag else None

    for t in range(cfg.o):
        h, c = _lstm_step(x, h, c, params, width)
        word_scores = None
        if "word_score_w" in params:
            word_scores = matmul(memory.word_states, matmul(params["word_score_w"], h, tb=True))
        sent_scores = None
        if "sent_score_w" in params:
            sent_scores = matmul(memory.sent_states, matmul(params["sent_score_w"], h, tb=True))

        if cfg.no_merge and word_scores is not None and sent_scores is not None:
            # two-stage: per-article word softmax scaled by sentence softmax
            word_grid = reshape(word_scores, (n, l))
            word_attn = masked_softmax(word_grid, axis=1,
                                       mask=memory.word_mask.reshape(n, l),
                                       allow_empty=True)
            sent_attn = masked_softmax(sent_scores, axis=0, mask=valid_arts[:, None])
            gamma_grid = mul(word_attn, sent_attn)
            gamma_col = reshape(gamma_grid, (n * l, 1))
        else:
            if word_scores is not None and sent_scores is not None:
                score = add(word_scores, matmul(expand, sent_scores))
            elif word_scores is not None:
                score = word_scores
            elif sent_scores is not None:
                score = matmul(expand, sent_scores)
            else:
                score = constant(np.zeros((n * l, 1)))
            gamma_col = masked_softmax(score, axis=0, mask=word_mask_col)

        context = matmul(gamma_col, memory.word_states, ta=True)
        h_hat = tanh(matmul(concat([h, context], axis=1), params["combine_w"], tb=True))
        if train and cfg.dropout > 0:
            h_hat = dropout(h_hat, cfg.dropout, rng)
        g_rows.append(h_hat)
        x = h_hat

        gamma[t] = gamma_col.data.reshape(n, l)
        if sent_scores is not None:
            with no_grad():
                beta[t] = masked_softmax(sent_scores, axis=0,
                                         mask=valid_arts[:, None]).data[:, 0]
        else:
            beta[t] = weights
        if collect_diag:
            pv = _vocab_distribution(h_hat, params)
            vocab_probs[t] = pv
            top_words.append(np.argsort(-pv)[:10].tolist())

    g = g_rows[0] if cfg.o == 1 else concat(g_rows, axis=0)
    return GlobalEvidence(g=g, gamma=gamma, beta=beta,
                          top_words=top_words if collect_diag else None,
                          vocab_probs=vocab_probs)
