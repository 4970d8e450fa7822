"""Per-class precision/recall/F1 plus micro- and macro-averaged F1."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import EmptyDataset


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def classification_metrics(y_true: Sequence[int], y_pred: Sequence[int],
                           n_classes: int,
                           label_names: Optional[list[str]] = None) -> dict:
    """Confusion-count metrics for single-label multiclass predictions.

    Micro-F1 pools counts over classes (equals accuracy here); macro-F1 is the
    unweighted mean of per-class F1.
    """
    y_true = np.asarray(list(y_true), dtype=np.int64)
    y_pred = np.asarray(list(y_pred), dtype=np.int64)
    if y_true.size == 0:
        raise EmptyDataset("no instances to evaluate")
    if label_names is None:
        label_names = [str(c) for c in range(n_classes)]
    per_class = []
    f1_sum = 0.0
    for c in range(n_classes):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        f1_sum += f1
        per_class.append({
            "label": label_names[c],
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": int(np.sum(y_true == c)),
        })
    accuracy = float(np.mean(y_true == y_pred))
    return {
        "micro_f1": accuracy,
        "macro_f1": f1_sum / n_classes,
        "n": int(y_true.size),
        "per_class": per_class,
    }


def evaluate(model, batch, indices=None, workers: int = 1) -> dict:
    """Run the model over a batch and compute metrics; optionally threaded."""
    if len(batch) == 0:
        raise EmptyDataset("no instances to evaluate")
    if indices is None:
        indices = list(range(len(batch)))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        def one(bi):
            return model.predict_batch(batch, [bi])[0].predicted

        with ThreadPoolExecutor(max_workers=workers) as pool:
            y_pred = list(pool.map(one, indices))
    else:
        y_pred = [p.predicted for p in model.predict_batch(batch, indices)]
    y_true = [int(batch.labels[bi]) for bi in indices]
    return classification_metrics(y_true, y_pred, model.cfg.n_classes,
                                  model.cfg.label_names)
