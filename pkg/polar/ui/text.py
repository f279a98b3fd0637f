"""Fixed-width text dumps of the induced latent graph."""

from __future__ import annotations

from typing import List

import numpy as np

from polar.dialogue import NodeSequence
from polar.models.inducer import LatentGraph

CELL = 9
LABEL = 12
PRUNING_DISABLED = "pruning disabled"


def _fit(s: str, width: int) -> str:
    s = s or ""
    return (s[:width]).ljust(width)


def _header(seq: NodeSequence, extra: List[str]) -> str:
    cols = []
    for i, n in enumerate(seq.nodes):
        mark = "*" if i == seq.predicate_index else ""
        cols.append(_fit(mark + n.surface, CELL))
    return _fit("", LABEL) + "".join(cols) + "".join(_fit(e, CELL) for e in extra)


def _matrix(seq: NodeSequence, mat: np.ndarray, with_stats: bool) -> List[str]:
    extra = ["support", "sum"] if with_stats else []
    lines = [_header(seq, extra)]
    for i, n in enumerate(seq.nodes):
        row = _fit(f"{i:>3} {n.surface}", LABEL) + "".join(_fit(f"{v:.4f}", CELL) for v in mat[i])
        if with_stats:
            row += _fit(str(int((mat[i] > 0).sum())), CELL) + f"{mat[i].sum():.8f}"
        lines.append(row.rstrip())
    return lines


def graph_dump(seq: NodeSequence, graph: LatentGraph) -> List[str]:
    """E_raw and E_pruned with node surfaces as headers; `*` marks the predicate column."""
    alpha = f"{graph.alpha.value:.4f}" if graph.alpha is not None else "n/a"
    prd = seq.nodes[seq.predicate_index].surface
    lines = [
        f"dialogue {seq.dialogue_id}  K={seq.K}  predicate={seq.predicate_index} ({prd})  alpha={alpha}  mode={graph.mode}",
        "",
        "E_raw",
    ]
    lines += _matrix(seq, graph.e_raw.data, with_stats=False)
    lines += ["", "E_pruned"]
    if not graph.pruned:
        lines.append(PRUNING_DISABLED)
    else:
        lines += _matrix(seq, graph.e_pruned.data, with_stats=True)
    return lines


def graph_to_dict(seq: NodeSequence, graph: LatentGraph) -> dict:
    return {
        "dialogue_id": seq.dialogue_id,
        "nodes": [n.surface for n in seq.nodes],
        "predicate_index": seq.predicate_index,
        "alpha": graph.alpha.value if graph.alpha is not None else None,
        "mode": graph.mode,
        "e_raw": graph.e_raw.data.tolist(),
        "e_pruned": graph.e_pruned.data.tolist() if graph.pruned else None,
        "pgi_weights": graph.pgi_weights.tolist() if graph.pgi_weights is not None else None,
    }
