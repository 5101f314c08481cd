"""Delimited report files and the matching matplotlib figures.

Every report path writes machine-readable TSV first and then renders
figures (Agg backend, fixed dpi) alongside: a bar chart for the metric
table and an annotated heatmap for the pairwise diversity matrix.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ensemble import MetricReport

__all__ = [
    "format_metrics",
    "render_diversity_figure",
    "render_metrics_figure",
    "write_diversity_tsv",
    "write_metrics_tsv",
]

_FLOAT = "{:.6f}"


def format_metrics(rows: list[tuple[str, MetricReport]]) -> str:
    """TSV text: name, accuracy, euc; one row per classifier or ensemble."""
    lines = ["name\taccuracy\teuc"]
    for name, report in rows:
        lines.append("\t".join([
            name, _FLOAT.format(report.accuracy), _FLOAT.format(report.euc)]))
    return "\n".join(lines) + "\n"


def write_metrics_tsv(rows: list[tuple[str, MetricReport]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_metrics(rows))


def write_diversity_tsv(tags: list[str], matrix: np.ndarray, path: str) -> None:
    matrix = np.asarray(matrix)
    if matrix.shape != (len(tags), len(tags)):
        raise ValueError("matrix shape must match the tag list")
    lines = ["\t".join([""] + tags)]
    for tag, row in zip(tags, matrix):
        lines.append("\t".join([tag] + [_FLOAT.format(v) for v in row]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def render_metrics_figure(rows: list[tuple[str, MetricReport]], path: str) -> None:
    """Grouped bars: accuracy up, EUC alongside, one group per entry."""
    names = [name for name, _ in rows]
    acc = [r.accuracy for _, r in rows]
    euc = [r.euc for _, r in rows]
    x = np.arange(len(names))
    width = max(6.0, 0.55 * len(names) + 2.0)
    fig, ax = plt.subplots(figsize=(width, 4.2))
    ax.bar(x - 0.2, acc, width=0.4, label="accuracy", color="#33658a")
    ax.bar(x + 0.2, euc, width=0.4, label="EUC", color="#f26419")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("Per-set and ensemble performance")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_diversity_figure(tags: list[str], matrix: np.ndarray, path: str) -> None:
    """Annotated symmetric heatmap of pairwise cosine similarity."""
    matrix = np.asarray(matrix)
    if matrix.shape != (len(tags), len(tags)):
        raise ValueError("matrix shape must match the tag list")
    m = len(tags)
    side = max(5.0, 0.42 * m + 1.8)
    fig, ax = plt.subplots(figsize=(side, side))
    im = ax.imshow(matrix, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(m))
    ax.set_yticks(range(m))
    ax.set_xticklabels(tags, rotation=90, fontsize=7)
    ax.set_yticklabels(tags, fontsize=7)
    if m <= 24:
        for i in range(m):
            for j in range(m):
                v = matrix[i, j]
                ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=5,
                        color="white" if v < 0.6 else "black")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    ax.set_title("Classifier similarity (cosine of score vectors)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
