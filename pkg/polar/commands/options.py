"""Arguments shared by the training-side subcommands."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Dict, Iterable

from polar.settings import ABLATION_FLAGS, SPEAKER_FLAGS, RunConfig, load_config


def add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="plain-text key = value config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--train", dest="train_path", default=None, help="training corpus")
    p.add_argument("--dev", dest="dev_path", default=None, help="development corpus")
    p.add_argument("--no-progress", dest="progress", action="store_false", default=None)


def _add_flags(p: argparse.ArgumentParser, names: Iterable[str]) -> None:
    for flag in names:
        p.add_argument("--" + flag.replace("_", "-"), dest=flag, action="store_true", default=None)


def add_ablation_args(p: argparse.ArgumentParser) -> None:
    _add_flags(p, ABLATION_FLAGS)


def add_speaker_args(p: argparse.ArgumentParser) -> None:
    _add_flags(p, SPEAKER_FLAGS)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    flags: Dict[str, object] = {}
    for key in ("seed", "epochs", "train_path", "dev_path", "progress", *ABLATION_FLAGS):
        if getattr(args, key, None) is not None:
            flags[key] = getattr(args, key)
    return load_config(args.config, args.overrides, flags)


def log_level_for(cfg: RunConfig, args: argparse.Namespace) -> str:
    """The config's `log_level` when set, else the global `--log-level`."""
    return cfg.log_level or getattr(args, "log_level", None) or "INFO"
