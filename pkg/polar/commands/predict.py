from __future__ import annotations

import argparse
from pathlib import Path

from polar.checkpoint import load_checkpoint
from polar.data.corpus import Corpus, load_corpus, save_corpus
from polar.log import get_logger
from polar.training import predict_dialogues

log = get_logger(__name__)


def register_predict(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("predict", help="decode role spans; output uses the corpus schema")
    p.add_argument("corpus", type=Path, metavar="CORPUS")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="prediction file")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.checkpoint)
    corpus = load_corpus(args.corpus)
    preds = predict_dialogues(model, corpus.dialogues, args.workers)
    save_corpus(Corpus(tuple(preds), model.tagset.roles, corpus.speakers), args.out)
    log.info("wrote %d predictions to %s", len(preds), args.out)
    return 0
