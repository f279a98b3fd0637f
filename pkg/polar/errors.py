from __future__ import annotations

from typing import Optional


class PolarError(Exception):
    """Base error. `code` is the stable token printed by the CLI."""

    code = "polar"


class ShapeError(PolarError):
    code = "shape-mismatch"


class DomainError(PolarError):
    code = "domain"


class NumericalError(PolarError):
    code = "non-finite"


class TapeError(PolarError):
    code = "tape"


class CorpusError(PolarError):
    """Corpus validation failure, tagged with the violated rule."""

    code = "corpus"

    def __init__(self, rule: str, message: str, *, line: Optional[int] = None, source: str = "") -> None:
        self.rule = rule
        self.detail = message
        self.line = line
        self.source = source
        where = ""
        if source and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}[{rule}] {message}")

    def at(self, *, line: Optional[int] = None, source: str = "") -> "CorpusError":
        """Same failure, located in a file."""
        return CorpusError(self.rule, self.detail, line=line if line is not None else self.line, source=source or self.source)


class EvaluationError(PolarError):
    code = "evaluation"


class CheckpointError(PolarError):
    code = "checkpoint"


class ConfigError(PolarError):
    code = "config"


class DivergenceError(PolarError):
    code = "divergence"
