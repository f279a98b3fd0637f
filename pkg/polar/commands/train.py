from __future__ import annotations

import argparse
from pathlib import Path

from polar.commands.options import add_ablation_args, add_config_args, config_from_args, log_level_for
from polar.log import setup_logging
from polar.settings import write_config_file
from polar.training import run_training


def register_train(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("train", help="train the full model (optional PSP phase first)")
    add_config_args(p)
    add_ablation_args(p)
    p.add_argument("--init", type=Path, default=None, help="encoder weights from a psp-pretrain checkpoint")
    p.add_argument("--out", type=Path, default=None, help="run directory (defaults to checkpoint_dir)")
    p.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    out = Path(args.out) if args.out is not None else Path(cfg.checkpoint_dir)
    setup_logging(log_level_for(cfg, args), out / "train.log")
    out.mkdir(parents=True, exist_ok=True)
    write_config_file(cfg, out / "config.txt")
    result = run_training(cfg, out, init=args.init)
    print(f"best_epoch={result.best_epoch} dev_f1_all={result.best_f1:.4f} checkpoint={result.checkpoint}")
    return 0
