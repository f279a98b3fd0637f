"""Run configuration.

Layering, lowest to highest precedence: packaged JSON defaults, a plain-text
`key = value` file, `--set key=value` overrides, dedicated CLI flags.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional

from polar.errors import ConfigError

_DEFAULTS_PATH = Path(__file__).resolve().parent / "config" / "polar_default.json"
_DEFAULTS: Optional[Dict[str, Any]] = None

ABLATION_FLAGS = ("no_pgi", "no_prune", "no_gate", "no_psp", "bert_style_pairing", "spk_label")
SPEAKER_FLAGS = ("bert_style_pairing", "spk_label")


def _load_defaults() -> Dict[str, Any]:
    global _DEFAULTS
    if _DEFAULTS is None:
        _DEFAULTS = json.loads(_DEFAULTS_PATH.read_text(encoding="utf-8"))
    return dict(_DEFAULTS)


@dataclass(frozen=True)
class RunConfig:
    train_path: str
    dev_path: str
    test_path: str
    checkpoint_dir: str

    vocab_min_freq: int
    n_speakers: int
    d_word: int
    d_speaker: int
    d_pos: int
    d_prd: int
    enc_layers: int
    enc_heads: int
    enc_hidden: int
    enc_ff: int
    max_len: int
    score_dim: int

    gcn_layers: int
    gcn_hidden: int

    lr: float
    weight_decay: float
    lr_schedule: str
    dropout: float
    alpha_init: float
    epochs: int
    psp_epochs: int
    batch_size: int
    seed: int

    no_pgi: bool
    no_prune: bool
    no_gate: bool
    no_psp: bool
    bert_style_pairing: bool
    spk_label: bool

    stochastic_edges: bool
    deterministic_eval: bool
    prune_axis: str
    shared_row_noise: bool
    param_norm: str

    workers: int
    progress: bool
    log_level: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 1.0 < self.alpha_init < 2.0:
            raise ConfigError(f"alpha_init must lie in (1, 2), got {self.alpha_init}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for key in ("epochs", "psp_epochs", "vocab_min_freq"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0, got {getattr(self, key)}")
        for key in ("batch_size", "workers", "gcn_layers", "gcn_hidden", "enc_heads", "enc_hidden", "score_dim"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1, got {getattr(self, key)}")
        if self.prune_axis not in ("row", "col"):
            raise ConfigError(f"prune_axis must be 'row' or 'col', got {self.prune_axis!r}")
        if self.param_norm not in ("none", "row"):
            raise ConfigError(f"param_norm must be 'none' or 'row', got {self.param_norm!r}")
        if self.lr_schedule not in ("constant", "linear"):
            raise ConfigError(f"lr_schedule must be 'constant' or 'linear', got {self.lr_schedule!r}")
        if self.log_level and self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ConfigError(f"log_level must be empty or one of DEBUG, INFO, WARNING, ERROR, got {self.log_level!r}")

    # -----------------
    # Construction
    # -----------------

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls.from_mapping(_load_defaults())

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(kinds))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        missing = sorted(set(kinds) - set(values))
        if missing:
            raise ConfigError(f"missing config key(s): {', '.join(missing)}")
        return cls(**{k: _coerce(k, kinds[k], v) for k, v in values.items()})

    def replace(self, **changes: Any) -> "RunConfig":
        merged = self.to_dict()
        merged.update(changes)
        return RunConfig.from_mapping(merged)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        return self.replace(**dict(overrides)) if overrides else self

    # -----------------
    # Views
    # -----------------

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def ablations(self) -> Dict[str, bool]:
        return {k: bool(getattr(self, k)) for k in ABLATION_FLAGS}

    def check_paths(self, keys: Iterable[str]) -> None:
        for key in keys:
            p = getattr(self, key)
            if not p:
                raise ConfigError(f"{key} is not set")
            if not Path(p).exists():
                raise ConfigError(f"{key} does not exist: {p}")


def _coerce(key: str, kind: str, value: Any) -> Any:
    if kind == "bool":
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if kind == "float":
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string, got {value!r}")
    return value


def parse_value(text: str) -> Any:
    """JSON literal when it parses, bare string otherwise."""
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_assignments(pairs: Iterable[str]) -> Dict[str, Any]:
    """`["lr=1e-3", "no_pgi=true"]` → {"lr": 0.001, "no_pgi": True}."""
    out: Dict[str, Any] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"override {pair!r} has an empty key")
        out[key] = parse_value(raw)
    return out


def read_config_file(path: Path) -> Dict[str, Any]:
    """Plain-text `key = value` lines; `#` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    out: Dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        out[key.strip()] = parse_value(raw)
    return out


def write_config_file(cfg: RunConfig, path: Path) -> None:
    lines = [f"{k} = {json.dumps(v)}" for k, v in cfg.to_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config(
    path: Optional[Path] = None,
    overrides: Iterable[str] = (),
    flags: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    values = _load_defaults()
    if path is not None:
        values.update(read_config_file(path))
    values.update(parse_assignments(overrides))
    values.update({k: v for k, v in (flags or {}).items() if v is not None})
    return RunConfig.from_mapping(values)
