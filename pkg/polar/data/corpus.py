"""Line-delimited corpus files.

Each non-empty line is one dialogue record. An optional first line
`{"meta": {"roles": [...], "speakers": [...]}}` declares the role and speaker
inventories; without it both are collected from the records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

from polar.dialogue import Dialogue
from polar.errors import CorpusError
from polar.log import get_logger

log = get_logger(__name__)


@dataclass(frozen=True)
class Corpus:
    dialogues: Tuple[Dialogue, ...]
    roles: Tuple[str, ...]
    speakers: Tuple[int, ...] = (0, 1)
    source: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        seen = set()
        known = set(self.roles)
        for d in self.dialogues:
            if d.dialogue_id in seen:
                raise CorpusError("unique-id", f"duplicate dialogue id {d.dialogue_id!r}", source=self.source)
            seen.add(d.dialogue_id)
            for span in d.roles:
                if span.role not in known:
                    raise CorpusError("unknown-role", f"{d.dialogue_id}: role {span.role!r} not in inventory", source=self.source)

    def __len__(self) -> int:
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)

    def subset(self, dialogues: Sequence[Dialogue]) -> "Corpus":
        return Corpus(tuple(dialogues), self.roles, self.speakers, self.source)


def _parse_line(line: str, n: int, source: str) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError("malformed-record", f"invalid JSON: {exc.msg}", line=n, source=source) from None
    if not isinstance(rec, dict):
        raise CorpusError("malformed-record", "record is not an object", line=n, source=source)
    return rec


def read_records(path: Path) -> Iterator[Tuple[int, dict]]:
    source = str(path)
    with Path(path).open("r", encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            if line.strip():
                yield n, _parse_line(line, n, source)


def load_corpus(path: Path, roles: Optional[Sequence[str]] = None) -> Corpus:
    """Read and validate a corpus; errors carry the offending line number."""
    path = Path(path)
    source = str(path)
    meta_roles: Optional[List[str]] = list(roles) if roles is not None else None
    meta_speakers: Optional[List[int]] = None
    dialogues: List[Dialogue] = []

    for n, rec in read_records(path):
        if "meta" in rec and not dialogues:
            meta = rec["meta"] or {}
            if meta_roles is None and meta.get("roles") is not None:
                meta_roles = [str(r) for r in meta["roles"]]
            if meta.get("speakers") is not None:
                meta_speakers = [int(s) for s in meta["speakers"]]
            continue
        try:
            d = Dialogue.from_record(rec)
            d.validate(meta_roles)
        except CorpusError as exc:
            raise exc.at(line=n, source=source) from None
        dialogues.append(d)

    if not dialogues:
        log.warning("corpus %s is empty", source)

    role_list = meta_roles if meta_roles is not None else sorted({s.role for d in dialogues for s in d.roles})
    speakers = meta_speakers if meta_speakers is not None else sorted({s for d in dialogues for s in d.speakers} | {0, 1})
    try:
        corpus = Corpus(tuple(dialogues), tuple(role_list), tuple(speakers), source)
    except CorpusError as exc:
        raise exc.at(source=source) from None
    log.info("loaded %d dialogues from %s (%d roles)", len(corpus), source, len(corpus.roles))
    return corpus


def save_corpus(corpus: Corpus, path: Path, *, with_meta: bool = True) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        if with_meta:
            f.write(json.dumps({"meta": {"roles": list(corpus.roles), "speakers": list(corpus.speakers)}}) + "\n")
        for d in corpus.dialogues:
            f.write(json.dumps(d.to_record(), ensure_ascii=False) + "\n")
