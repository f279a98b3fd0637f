"""Session state of the Streamlit inspector, independent of Streamlit itself."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from polar.checkpoint import load_checkpoint
from polar.training import METRICS_FILE, read_metrics
from polar.data.corpus import Corpus, load_corpus
from polar.dialogue import Dialogue, NodeSequence
from polar.errors import PolarError
from polar.models.inducer import LatentGraph
from polar.models.network import PolarModel
from polar.models.tagger import spans_from_tags


@dataclass
class ViewerState:
    model: Optional[PolarModel] = None
    corpus: Optional[Corpus] = None
    index: int = 0
    metrics: List[dict] = field(default_factory=list)
    last_message: str = ""
    history: List[str] = field(default_factory=list)

    def _say(self, msg: str) -> None:
        self.last_message = msg
        self.history.append(msg)

    def open_checkpoint(self, path: str) -> bool:
        try:
            self.model = load_checkpoint(Path(path))
            metrics = Path(path).with_name(METRICS_FILE)
            self.metrics = read_metrics(metrics) if metrics.exists() else []
        except (PolarError, OSError, ValueError) as exc:
            self._say(f"checkpoint not loaded: {exc}")
            return False
        self._say(f"checkpoint loaded: {path} (roles {', '.join(self.model.tagset.roles)})")
        return True

    def open_corpus(self, path: str) -> bool:
        try:
            self.corpus = load_corpus(Path(path))
        except (PolarError, OSError) as exc:
            self._say(f"corpus not loaded: {exc}")
            return False
        self.index = 0
        self._say(f"corpus loaded: {len(self.corpus)} dialogues")
        return True

    @property
    def ready(self) -> bool:
        return self.model is not None and self.corpus is not None and len(self.corpus) > 0

    def select(self, index: int) -> None:
        if self.corpus is None or not len(self.corpus):
            return
        self.index = max(0, min(index, len(self.corpus) - 1))

    def current(self) -> Optional[Dialogue]:
        if self.corpus is None or not len(self.corpus):
            return None
        return self.corpus.dialogues[self.index]

    def analyze(self) -> Optional[Tuple[NodeSequence, LatentGraph, List[str], Dialogue]]:
        """(nodes, graph, predicted labels, predicted dialogue) for the current record."""
        d = self.current()
        if self.model is None or d is None:
            return None
        seq, graph = self.model.inspect(d)
        labels = self.model.predict_labels(seq)
        pred = d.with_roles(seq.to_role_spans(spans_from_tags(labels)))
        return seq, graph, labels, pred
