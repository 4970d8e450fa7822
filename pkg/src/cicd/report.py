"""Render training curves, metric bars, and attention heatmaps to PNG files,
with CSV summaries written alongside. Consumes the JSON/JSONL outputs of the
train/eval/explain commands; matplotlib stays confined to this module.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def render_training_curves(trace_path: Path, out_dir: Path) -> list[Path]:
    rows = _read_jsonl(trace_path)
    if not rows:
        return []
    epochs = [r["epoch"] for r in rows]
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(epochs, [r["mean_loss"] for r in rows], label="total")
    ax_loss.plot(epochs, [r["mean_cross_entropy"] for r in rows], label="cross-entropy")
    ax_loss.plot(epochs, [r["mean_inconsistency"] for r in rows], label="inconsistency")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean training loss")
    ax_loss.legend()
    ax_f1.plot(epochs, [r["dev_micro_f1"] for r in rows], label="dev micF1")
    ax_f1.plot(epochs, [r["dev_macro_f1"] for r in rows], label="dev macF1")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("dev F1")
    ax_f1.set_ylim(0.0, 1.05)
    ax_f1.legend()
    fig.tight_layout()
    png = out_dir / "training_curves.png"
    fig.savefig(png, dpi=150)
    plt.close(fig)

    csv_path = out_dir / "trace.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return [png, csv_path]


def render_metrics(metrics_path: Path, out_dir: Path) -> list[Path]:
    report = json.loads(metrics_path.read_text())
    per_class = report.get("per_class", [])
    if not per_class:
        return []
    labels = [row["label"] for row in per_class]
    x = np.arange(len(labels))
    width = 0.27
    fig, ax = plt.subplots(figsize=(1.8 * len(labels) + 3, 4))
    ax.bar(x - width, [r["precision"] for r in per_class], width, label="precision")
    ax.bar(x, [r["recall"] for r in per_class], width, label="recall")
    ax.bar(x + width, [r["f1"] for r in per_class], width, label="F1")
    ax.set_xticks(x, labels)
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"micF1 {report['micro_f1']:.3f}  macF1 {report['macro_f1']:.3f}  "
                 f"n {report['n']}")
    ax.legend()
    fig.tight_layout()
    png = out_dir / "metrics_per_class.png"
    fig.savefig(png, dpi=150)
    plt.close(fig)

    csv_path = out_dir / "metrics_per_class.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["label", "precision", "recall",
                                                "f1", "support"])
        writer.writeheader()
        writer.writerows(per_class)
    return [png, csv_path]


def render_explanation(dump: dict, out_dir: Path) -> list[Path]:
    """One figure per instance: merged attention heatmaps plus the similarity
    matrix and difference scores."""
    panels = []
    if "ced" in dump:
        panels.append("gamma")
        panels.append("beta")
    if "isi" in dump and "similarity" in dump.get("isi", {}):
        panels.append("similarity")
        panels.append("difference")
    if not panels:
        return []
    fig, axes = plt.subplots(1, len(panels), figsize=(4.5 * len(panels), 3.6))
    if len(panels) == 1:
        axes = [axes]
    for ax, panel in zip(axes, panels):
        if panel == "gamma":
            gamma = np.asarray(dump["ced"]["gamma"]["values"])
            merged = gamma.reshape(gamma.shape[0], -1)  # steps x (article*word)
            im = ax.imshow(merged, aspect="auto", cmap="viridis")
            ax.set_title("combined attention per step")
            ax.set_xlabel("(article, word)")
            ax.set_ylabel("step")
            fig.colorbar(im, ax=ax, fraction=0.046)
        elif panel == "beta":
            beta = np.asarray(dump["ced"]["beta"]["values"])
            im = ax.imshow(beta, aspect="auto", cmap="magma")
            ax.set_title("sentence attention per step")
            ax.set_xlabel("article")
            ax.set_ylabel("step")
            fig.colorbar(im, ax=ax, fraction=0.046)
        elif panel == "similarity":
            sim = np.asarray(dump["isi"]["similarity"]["values"])
            im = ax.imshow(sim, cmap="cividis")
            ax.set_title("inter-article similarity")
            fig.colorbar(im, ax=ax, fraction=0.046)
        elif panel == "difference":
            diff = np.asarray(dump["isi"]["difference_scores"])
            colors = ["tab:red" if i in set(dump["isi"]["chosen"]) else "tab:blue"
                      for i in range(diff.size)]
            ax.bar(np.arange(diff.size), diff, color=colors)
            ax.set_title("difference scores (red = chosen)")
            ax.set_xlabel("article")
    fig.suptitle(f"{dump['id']}: predicted {dump['predicted_label']}")
    fig.tight_layout()
    png = out_dir / f"explanation_{dump['id']}.png"
    fig.savefig(png, dpi=150)
    plt.close(fig)
    return [png]


def render_report(run_dir: Optional[Path], trace: Optional[Path],
                  metrics: Optional[Path], explain: Optional[Path],
                  out_dir: Path, max_explanations: int = 4) -> list[Path]:
    """Render whatever inputs are available; returns the files written."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if run_dir is not None:
        if trace is None and (run_dir / "trace.jsonl").exists():
            trace = run_dir / "trace.jsonl"
        if metrics is None and (run_dir / "metrics.json").exists():
            metrics = run_dir / "metrics.json"
    written: list[Path] = []
    if trace is not None:
        written += render_training_curves(trace, out_dir)
    if metrics is not None:
        written += render_metrics(metrics, out_dir)
    if explain is not None:
        for dump in _read_jsonl(explain)[:max_explanations]:
            written += render_explanation(dump, out_dir)
    return written
