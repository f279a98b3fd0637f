from __future__ import annotations

import argparse
from pathlib import Path

from polar.checkpoint import load_checkpoint
from polar.data.corpus import load_corpus
from polar.errors import CorpusError
from polar.ui.text import graph_dump


def register_inspect_graph(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("inspect-graph", help="dump the induced latent graph of one dialogue")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dialogue", type=Path, required=True, help="corpus file holding the dialogue")
    p.add_argument("--index", type=int, default=0, help="record index inside the file")
    p.add_argument("--out", type=Path, default=None, help="text dump (stdout when omitted)")
    p.add_argument("--png", type=Path, default=None, help="also render heatmaps")
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.dialogue)
    if not 0 <= args.index < len(corpus):
        raise CorpusError("index", f"record {args.index} not in a file of {len(corpus)} dialogues", source=str(args.dialogue))
    seq, graph = model.inspect(corpus.dialogues[args.index])
    text = "\n".join(graph_dump(seq, graph)) + "\n"
    if args.out is None:
        print(text, end="")
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    if args.png is not None:
        from polar.ui.plots import save_graph_png

        save_graph_png(seq, graph, args.png)
    return 0
