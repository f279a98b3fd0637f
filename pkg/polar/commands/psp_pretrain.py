from __future__ import annotations

import argparse
from pathlib import Path

from polar.commands.options import add_config_args, add_speaker_args, config_from_args, log_level_for
from polar.log import get_logger, setup_logging
from polar.training import run_psp_pretrain

log = get_logger(__name__)


def register_psp_pretrain(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("psp-pretrain", help="pronoun-based speaker prediction pretraining of the encoder")
    add_config_args(p)
    add_speaker_args(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    setup_logging(log_level_for(cfg, args), Path(args.out) / "train.log")
    path, acc = run_psp_pretrain(cfg, args.out)
    print(f"psp checkpoint={path} accuracy={acc:.4f}")
    return 0
