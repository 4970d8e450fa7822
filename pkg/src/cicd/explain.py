"""Machine-readable explanation dumps: per-step decoder attention, the
inter-sentential similarity matrix, difference scores, chosen articles, and
per-fragment co-interaction weights for one instance.
"""

from __future__ import annotations

import numpy as np

from .data import ClaimInstance, encode_batch
from .model import DualViewModel, Prediction
from .tensor import no_grad


def _array_block(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "values": arr.tolist()}


def explain_instance(model: DualViewModel, instance: ClaimInstance) -> dict:
    """Forward one instance with diagnostics and serialize the evidence."""
    cfg = model.cfg
    batch = encode_batch([instance], model.vocab, cfg)
    with no_grad():
        pred: Prediction = model.forward(
            batch.claim_ids[0], batch.claim_mask[0],
            batch.article_ids[0], batch.article_mask[0],
            int(batch.article_count[0]), int(batch.labels[0]),
            collect_diag=True)

    dump: dict = {
        "id": instance.id,
        "gold_label": cfg.label_names[instance.label],
        "predicted_label": cfg.label_names[pred.predicted],
        "probs": pred.probs.tolist(),
        "loss": {
            "total": pred.total.item() if pred.total is not None else None,
            "cross_entropy": (pred.cross_entropy.item()
                              if pred.cross_entropy is not None else None),
            "inconsistency": (pred.inconsistency.item()
                              if pred.inconsistency is not None else None),
        },
    }

    if pred.global_evidence is not None:
        gev = pred.global_evidence
        ced_block = {
            "gamma": _array_block(gev.gamma),
            "beta": _array_block(gev.beta),
        }
        if gev.top_words is not None:
            ced_block["top_words"] = [
                {"ids": ids, "tokens": model.vocab.decode(ids)}
                for ids in gev.top_words
            ]
        dump["ced"] = ced_block

    if pred.local_evidence is not None:
        lev = pred.local_evidence
        isi_block: dict = {"chosen": list(lev.chosen)}
        if lev.selection is not None:
            isi_block["similarity"] = _array_block(lev.selection.similarity)
            isi_block["difference_scores"] = lev.selection.difference.tolist()
        isi_block["fragments"] = [
            {
                "article": int(article),
                "claim_attention": w_claim.tolist(),
                "article_attention": w_art.tolist(),
            }
            for article, w_claim, w_art in zip(
                lev.chosen, lev.claim_attention, lev.article_attention)
        ]
        dump["isi"] = isi_block

    return dump
