from __future__ import annotations

import argparse
from pathlib import Path

from polar.data.corpus import save_corpus
from polar.data.synthetic import SPLIT_NAMES, GeneratorSpec, gen_synthetic, split_corpus
from polar.log import get_logger
from polar.settings import parse_assignments

log = get_logger(__name__)


def register_gen_data(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("gen-data", help="generate a synthetic train/dev/test corpus")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dialogues", type=int, default=None, help="total dialogues before the 80/10/10 split")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="generator setting")
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    values = parse_assignments(args.overrides)
    if args.seed is not None:
        values["seed"] = args.seed
    if args.dialogues is not None:
        values["n_dialogues"] = args.dialogues
    spec = GeneratorSpec.from_mapping(values)
    splits = split_corpus(gen_synthetic(spec), seed=spec.seed)
    for name in SPLIT_NAMES:
        path = Path(args.out) / f"{name}.jsonl"
        save_corpus(splits[name], path)
        log.info("wrote %d dialogues to %s", len(splits[name]), path)
    return 0
