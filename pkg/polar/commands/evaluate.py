from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import List

from polar.checkpoint import load_checkpoint, read_meta
from polar.data.corpus import load_corpus
from polar.data.evaluate import EvalReport, evaluate
from polar.errors import CheckpointError, ConfigError
from polar.log import get_logger
from polar.training import evaluate_dialogues

log = get_logger(__name__)


def register_evaluate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("evaluate", help="score a checkpoint on one or more corpora")
    p.add_argument("corpora", nargs="+", type=Path, metavar="CORPUS")
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None, help="directory for report.json / report.txt per corpus")
    p.add_argument("--gold-passthrough", action="store_true", help="score gold against itself")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=run)


def write_report(report: EvalReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "report.txt").write_text("\n".join(report.render_table()) + "\n", encoding="utf-8")


def run(args: argparse.Namespace) -> int:
    if args.checkpoint is None and not args.gold_passthrough:
        raise ConfigError("evaluate needs --checkpoint unless --gold-passthrough is given")

    model = None
    roles = None
    if args.checkpoint is not None:
        roles = read_meta(args.checkpoint).roles
        overrides = {"workers": args.workers} if args.workers is not None else None
        model = load_checkpoint(args.checkpoint, overrides=overrides)

    reports: List[EvalReport] = []
    for path in args.corpora:
        corpus = load_corpus(path)
        if roles is not None and not set(corpus.roles) <= set(roles):
            extra = sorted(set(corpus.roles) - set(roles))
            raise CheckpointError(f"tagset mismatch: {path} uses roles {extra} unknown to the checkpoint")
        if model is None:
            report = evaluate(corpus.dialogues, corpus.dialogues)
        else:
            _, report = evaluate_dialogues(model, corpus.dialogues, args.workers)
        reports.append(report)
        print(f"== {path}")
        print("\n".join(report.render_table()))
        if args.out is not None:
            target = Path(args.out) / path.stem if len(args.corpora) > 1 else Path(args.out)
            write_report(report, target)
            log.info("wrote report for %s to %s", path, target)
    return 0
