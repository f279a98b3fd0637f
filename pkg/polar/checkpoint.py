"""Single-file model checkpoints.

An `.npz` container holds every parameter array under `param/<name>` and a
`__meta__` JSON string with the format version, tagset roles, vocabulary file
name, full run config and its digest. The vocabulary is written next to the
checkpoint as a text file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from polar.errors import CheckpointError, ConfigError, ShapeError
from polar.log import get_logger
from polar.models.encoder import Vocabulary
from polar.models.network import PolarModel
from polar.models.tagger import Tagset
from polar.settings import SPEAKER_FLAGS, RunConfig

log = get_logger(__name__)

FORMAT_VERSION = 1
MODEL_FILE = "model.npz"
VOCAB_FILE = "vocab.txt"
_PARAM_PREFIX = "param/"
_META_KEY = "__meta__"


@dataclass(frozen=True)
class CheckpointMeta:
    version: int
    roles: Tuple[str, ...]
    vocab_file: str
    config: dict
    config_hash: str
    kind: str = "model"

    def run_config(self) -> RunConfig:
        try:
            return RunConfig.from_mapping(self.config)
        except ConfigError as exc:
            raise CheckpointError(f"checkpoint config is not loadable: {exc}") from None


def save_checkpoint(model: PolarModel, path: Path, *, kind: str = "model") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vocab_path = path.with_name(VOCAB_FILE)
    model.vocab.save(vocab_path)
    meta = {
        "version": FORMAT_VERSION,
        "roles": list(model.tagset.roles),
        "vocab_file": vocab_path.name,
        "config": model.cfg.to_dict(),
        "config_hash": model.cfg.digest(),
        "kind": kind,
    }
    arrays = {_PARAM_PREFIX + name: arr for name, arr in model.state_dict().items()}
    arrays[_META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    # np.savez appends .npz to names without it; write through a handle instead
    with path.open("wb") as f:
        np.savez(f, **arrays)
    log.info("saved %s checkpoint to %s", kind, path)
    return path


def read_meta(path: Path) -> CheckpointMeta:
    with _open(path) as data:
        return _meta(data, path)


def _open(path: Path):
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        return np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None


def _meta(data, path: Path) -> CheckpointMeta:
    if _META_KEY not in data.files:
        raise CheckpointError(f"{path}: missing metadata record")
    try:
        raw = json.loads(str(data[_META_KEY]))
        meta = CheckpointMeta(
            version=int(raw["version"]),
            roles=tuple(raw["roles"]),
            vocab_file=str(raw["vocab_file"]),
            config=dict(raw["config"]),
            config_hash=str(raw["config_hash"]),
            kind=str(raw.get("kind", "model")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed metadata ({exc})") from None
    if meta.version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.version}, expected {FORMAT_VERSION}")
    return meta


def load_checkpoint(
    path: Path,
    *,
    roles: Optional[Sequence[str]] = None,
    overrides: Optional[dict] = None,
) -> PolarModel:
    """Rebuild the model stored at `path`.

    `roles`, when given, must match the stored tagset. `overrides` replaces
    config values that do not change parameter shapes (e.g. workers).
    """

    path = Path(path)
    with _open(path) as data:
        meta = _meta(data, path)
        state = {k[len(_PARAM_PREFIX) :]: data[k] for k in data.files if k.startswith(_PARAM_PREFIX)}

    if roles is not None and tuple(roles) != meta.roles:
        raise CheckpointError(f"tagset mismatch: checkpoint has roles {list(meta.roles)}, corpus has {list(roles)}")
    cfg = meta.run_config()
    if cfg.digest() != meta.config_hash:
        raise CheckpointError(f"{path}: config hash does not match the stored config")
    if overrides:
        cfg = cfg.with_overrides(overrides)

    vocab_path = path.with_name(meta.vocab_file)
    if not vocab_path.exists():
        raise CheckpointError(f"vocabulary file not found next to checkpoint: {vocab_path}")
    vocab = Vocabulary.load(vocab_path)
    model = PolarModel(cfg, vocab, Tagset.from_roles(meta.roles), np.random.default_rng(cfg.seed))
    try:
        model.load_state_dict(state)
    except ShapeError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    log.info("loaded checkpoint %s (%d parameters)", path, len(state))
    return model


def load_encoder_weights(model: PolarModel, path: Path) -> int:
    """Copy matching encoder parameters from another checkpoint (PSP warm start)."""
    with _open(path) as data:
        meta = _meta(data, Path(path))
        stored = {k[len(_PARAM_PREFIX) :]: data[k] for k in data.files if k.startswith(_PARAM_PREFIX)}
    for flag in SPEAKER_FLAGS:
        theirs, ours = bool(meta.config.get(flag, False)), bool(getattr(model.cfg, flag))
        if theirs != ours:
            raise CheckpointError(f"{path}: encoder was pretrained with {flag}={theirs}, this run sets {flag}={ours}")
    copied = 0
    for name, p in model.named_parameters():
        if not name.startswith("encoder."):
            continue
        arr = stored.get(name)
        if arr is None:
            continue
        if arr.shape != p.data.shape:
            raise CheckpointError(f"{path}: {name} has shape {arr.shape}, model expects {p.data.shape}")
        p.data = np.asarray(arr, dtype=np.float64).copy()
        copied += 1
    if copied == 0:
        raise CheckpointError(f"{path}: no encoder parameters to initialize from")
    log.info("initialized %d encoder parameters from %s", copied, path)
    return copied
