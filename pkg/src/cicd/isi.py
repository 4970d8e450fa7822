"""Individual-cognition pathway: per-article sentence representations, the
inter-sentential similarity matrix with top-k difference screening, and the
claim/article co-interaction that yields local evidence fragments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ced import encode_bilstm, last_unmasked_index, sentence_state
from .config import ModelConfig
from .errors import AllMasked
from .params import ParamSet
from .tensor import (Tensor, add, concat, constant, masked_softmax, matmul,
                     narrow, tanh)


def sentence_reps(article_embs: list[Tensor], article_mask: np.ndarray,
                  params: ParamSet, cfg: ModelConfig) -> tuple[Tensor, np.ndarray]:
    """Encode each article with the ISI BiLSTM and keep the last-word state.

    Returns ([N, 2*d_h] states, [N] validity mask). With share_isi_encoder the
    CED article encoder weights are reused.
    """
    prefix = "article_enc" if cfg.share_isi_encoder else "isi_enc"
    width = cfg.state_width
    rows_out = []
    for i, emb in enumerate(article_embs):
        states = encode_bilstm(None, article_mask[i], params, prefix, cfg, embedded=emb)
        rows_out.append(sentence_state(states, article_mask[i], width))
    stacked = rows_out[0] if len(rows_out) == 1 else concat(rows_out, axis=0)
    return stacked, article_mask.any(axis=1)


def difference_matrix(sent_reps: Tensor, params: ParamSet) -> Tensor:
    """Column-normalized pairwise similarity of article representations.

    Entry (m, n) is softmax over m of dot(u_m, u_n) where u vectors are
    tanh-bounded linear maps of the sentence representations; each column
    sums to 1.
    """
    u_row = tanh(add(matmul(sent_reps, params["diff_row_w"], tb=True), params["diff_row_b"]))
    u_col = tanh(add(matmul(sent_reps, params["diff_col_w"], tb=True), params["diff_col_b"]))
    scores = matmul(u_row, u_col, tb=True)
    return masked_softmax(scores, axis=0)


@dataclass
class SelectionResult:
    similarity: np.ndarray    # [N, N] column-normalized matrix
    difference: np.ndarray    # [N] per-article difference score
    chosen: list[int]         # ascending indices of the selected articles


def select_topk(similarity: np.ndarray, k: int) -> SelectionResult:
    """Pick the min(k, N) most-different articles.

    Difference score of article m is the negated mean of the symmetrized
    off-diagonal similarities (A[m,n] + A[n,m]) / 2; larger means more
    different. Ties break toward the lower index; output is sorted ascending.
    """
    a = np.asarray(similarity, dtype=np.float64)
    n = a.shape[0]
    if n == 1:
        return SelectionResult(similarity=a.copy(), difference=np.zeros(1), chosen=[0])
    sym = 0.5 * (a + a.T)
    diff = np.empty(n)
    for m in range(n):
        # ordered summation over j != m keeps exact ties exact
        total = 0.0
        for j in range(n):
            if j != m:
                total += sym[m, j]
        diff[m] = -total / (n - 1)
    order = np.lexsort((np.arange(n), -diff))
    chosen = sorted(int(i) for i in order[:min(k, n)])
    return SelectionResult(similarity=a.copy(), difference=diff, chosen=chosen)


def co_interact(article_rep: Tensor, claim_states: Tensor, claim_mask: np.ndarray
                ) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Bidirectional attention between one article representation and the claim.

    The article attends over claim positions and is residually enriched; every
    claim row attends back to the article and the last unmasked row is kept.
    Returns ([1, 4*d_h] fragment, claim-attention [p], article-attention [p]).
    """
    last = last_unmasked_index(claim_mask)
    if last < 0:
        raise AllMasked("co-interaction requires at least one unmasked claim position")
    art_scores = matmul(article_rep, claim_states, tb=True)          # [1, p]
    art_over_claim = masked_softmax(art_scores, axis=1, mask=claim_mask[None, :])
    enriched_article = add(article_rep, matmul(art_over_claim, claim_states))

    claim_scores = matmul(claim_states, article_rep, tb=True)        # [p, 1]
    claim_over_art = masked_softmax(claim_scores, axis=0, mask=claim_mask[:, None])
    enriched_claim = add(claim_states, matmul(claim_over_art, article_rep))
    pooled_claim = narrow(enriched_claim, 0, last, 1)

    fragment = concat([enriched_article, pooled_claim], axis=1)
    return fragment, art_over_claim.data[0].copy(), claim_over_art.data[:, 0].copy()


def concat_fragment(article_rep: Tensor, claim_states: Tensor,
                    claim_mask: np.ndarray) -> Tensor:
    """No-interaction variant: plain [article; pooled claim] concatenation."""
    last = last_unmasked_index(claim_mask)
    if last < 0:
        raise AllMasked("fragment requires at least one unmasked claim position")
    return concat([article_rep, narrow(claim_states, 0, last, 1)], axis=1)


@dataclass
class LocalEvidence:
    flat: Tensor                      # [1, k*4*d_h]
    chosen: list[int]
    selection: Optional[SelectionResult]
    claim_attention: list[np.ndarray]    # per fragment, [p]
    article_attention: list[np.ndarray]  # per fragment, [p]


def local_evidence(fragments: list[Tensor], chosen: list[int],
                   cfg: ModelConfig) -> Tensor:
    """Concatenate fragments in chosen order, zero-padded to k slots."""
    frag_width = 4 * cfg.d_h
    parts = list(fragments)
    missing = cfg.k - len(parts)
    if missing > 0:
        parts.append(constant(np.zeros((1, missing * frag_width))))
    return parts[0] if len(parts) == 1 else concat(parts, axis=1)


def mean_fragments(fragments: list[Tensor], cfg: ModelConfig) -> Tensor:
    """No-selection variant: mean-pool every article's fragment, tiled to the
    k fragment slots so the classifier width stays fixed."""
    n = len(fragments)
    stacked = fragments[0] if n == 1 else concat(fragments, axis=0)
    pooled = matmul(constant(np.full((1, n), 1.0 / n)), stacked)
    return pooled if cfg.k == 1 else concat([pooled] * cfg.k, axis=1)
