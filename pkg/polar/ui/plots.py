"""matplotlib figures for the latent graph and the alpha trajectory.

matplotlib is imported on first use.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from polar.dialogue import NodeSequence
from polar.models.inducer import LatentGraph


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt  # type: ignore

    return plt


def heatmap(ax, mat: np.ndarray, labels: Sequence[str], title: str, marked: Optional[int] = None) -> None:
    im = ax.imshow(mat, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_title(title)
    ticks = np.arange(len(labels))
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    ax.set_xticklabels(labels, rotation=90, fontsize=7)
    ax.set_yticklabels(labels, fontsize=7)
    if marked is not None:
        ax.axvline(marked, color="red", linewidth=1)
    ax.figure.colorbar(im, ax=ax, fraction=0.046, pad=0.04)


def graph_figure(seq: NodeSequence, graph: LatentGraph):
    plt = _pyplot()
    labels = [n.surface for n in seq.nodes]
    panels = [(graph.e_raw.data, "E_raw")]
    if graph.pruned:
        panels.append((graph.e_pruned.data, f"E_pruned (alpha={graph.alpha.value:.3f})"))
    if graph.pgi_weights is not None:
        panels.append((graph.pgi_weights, "PGI weights"))
    fig = plt.figure(figsize=(4.8 * len(panels), 4.4), dpi=120)
    for i, (mat, title) in enumerate(panels, start=1):
        heatmap(fig.add_subplot(1, len(panels), i), mat, labels, title, seq.predicate_index)
    fig.tight_layout()
    return fig


def save_graph_png(seq: NodeSequence, graph: LatentGraph, path: Path) -> Path:
    plt = _pyplot()
    fig = graph_figure(seq, graph)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def alpha_series(records: Sequence[dict]) -> np.ndarray:
    return np.array([r["alpha"] for r in records if r.get("event") == "step" and r.get("alpha") is not None])


def plot_alpha_trajectory(records: Sequence[dict], path: Optional[Path] = None):
    """Per-step alpha from a metrics log; saved when `path` is given."""
    plt = _pyplot()
    alphas = alpha_series(records)
    fig = plt.figure(figsize=(5.8, 2.9), dpi=120)
    ax = fig.add_subplot(111)
    ax.plot(np.arange(len(alphas)), alphas)
    ax.axhline(1.5, linewidth=1, linestyle="--", color="grey")
    ax.set_xlabel("step")
    ax.set_ylabel("alpha")
    ax.set_ylim(1.0, 2.0)
    ax.set_title("alpha trajectory")
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path)
    return fig
