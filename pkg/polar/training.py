"""PSP pretraining, task training and corpus-level inference."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from tqdm.auto import tqdm

from polar.checkpoint import MODEL_FILE, load_encoder_weights, read_meta, save_checkpoint
from polar.core import AdamState, Value, adam_step, add, backward, mul, zero_grad
from polar.data.corpus import Corpus, load_corpus
from polar.data.evaluate import EvalReport, evaluate
from polar.dialogue import Dialogue, NodeSequence, linearize
from polar.errors import DivergenceError, NumericalError
from polar.log import get_logger
from polar.models.encoder import Vocabulary
from polar.models.network import PolarModel
from polar.models.tagger import Tagset
from polar.settings import RunConfig

log = get_logger(__name__)

METRICS_FILE = "metrics.jsonl"


class MetricsLog:
    """Line-delimited JSON records. No timestamps, so seeded runs match byte for byte."""

    def __init__(self, path: Optional[Path] = None) -> None:
        self.path = Path(path) if path is not None else None
        self.records: List[dict] = []
        self._fh: Optional[IO[str]] = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("w", encoding="utf-8")

    def write(self, event: str, **fields) -> None:
        rec = {"event": event, **fields}
        self.records.append(rec)
        if self._fh is not None:
            self._fh.write(json.dumps(rec, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "MetricsLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_metrics(path: Path) -> List[dict]:
    with Path(path).open("r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


@dataclass
class TrainResult:
    best_epoch: int = -1
    best_dev: Optional[EvalReport] = None
    checkpoint: Optional[Path] = None
    losses: List[float] = field(default_factory=list)
    alphas: List[float] = field(default_factory=list)
    psp_accuracy: Optional[float] = None

    @property
    def best_f1(self) -> float:
        return self.best_dev.f1_all if self.best_dev is not None else 0.0


def _batches(items: Sequence, batch_size: int, rng: np.random.Generator) -> Iterator[List]:
    order = rng.permutation(len(items))
    for lo in range(0, len(order), batch_size):
        yield [items[i] for i in order[lo : lo + batch_size]]


def _mean(losses: Sequence[Value]) -> Value:
    total = losses[0]
    for x in losses[1:]:
        total = add(total, x)
    return mul(total, 1.0 / len(losses))


WARMUP_FRAC = 0.05


def scheduled_lr(base: float, step: int, total: int, schedule: str = "linear") -> float:
    """Linear warmup over the first WARMUP_FRAC of `total` steps, then linear decay towards zero."""
    if schedule == "constant" or total <= 0:
        return base
    warm = max(1, int(WARMUP_FRAC * total))
    if step < warm:
        return base * (step + 1) / warm
    return base * max(total - step, 1) / max(total - warm, 1)


class Trainer:
    def __init__(self, model: PolarModel, metrics: Optional[MetricsLog] = None, rng: Optional[np.random.Generator] = None) -> None:
        self.model = model
        self.cfg = model.cfg
        self.metrics = metrics or MetricsLog()
        self.rng = rng if rng is not None else np.random.default_rng(self.cfg.seed + 1)

    def _progress(self, it, total: int, desc: str):
        return tqdm(it, total=total, desc=desc, leave=False, dynamic_ncols=True, disable=not self.cfg.progress)

    def _step(self, loss_fn, batch: Sequence[NodeSequence], params: List[Value], state: AdamState, where: str) -> float:
        try:
            loss = _mean([loss_fn(seq, self.rng) for seq in batch])
            value = loss.item()
            if not math.isfinite(value):
                raise NumericalError("loss is not finite")
            backward(loss)
            adam_step(params, state)
        except NumericalError as exc:
            zero_grad(params)
            log.error("divergence at %s: %s", where, exc)
            raise DivergenceError(f"training diverged at {where}: {exc}") from None
        return value

    # -----------------
    # PSP phase
    # -----------------

    def pretrain_psp(self, seqs: Sequence[NodeSequence], epochs: Optional[int] = None) -> float:
        """Pure PSP objective over dialogues with labeled pronouns; returns final accuracy."""
        labeled = [s for s in seqs if s.pronoun_targets()[0]]
        epochs = self.cfg.psp_epochs if epochs is None else epochs
        if not labeled:
            log.warning("no labeled pronouns; skipping PSP pretraining")
            return 0.0
        params = self.model.psp_parameters()
        state = AdamState(lr=self.cfg.lr, weight_decay=self.cfg.weight_decay)
        acc = 0.0
        for epoch in range(1, epochs + 1):
            losses = []
            n_batches = math.ceil(len(labeled) / self.cfg.batch_size)
            for i, batch in enumerate(self._progress(_batches(labeled, self.cfg.batch_size, self.rng), n_batches, f"psp {epoch}")):
                losses.append(self._step(self.model.psp_loss, batch, params, state, f"psp epoch {epoch} step {i}"))
            acc = self.model.psp_accuracy(labeled)
            mean_loss = float(np.mean(losses))
            self.metrics.write("psp_epoch", epoch=epoch, loss=mean_loss, accuracy=acc)
            log.info("psp epoch %d: loss=%.4f accuracy=%.4f", epoch, mean_loss, acc)
        return acc

    # -----------------
    # Task phase
    # -----------------

    def train(
        self,
        train_seqs: Sequence[NodeSequence],
        dev: Sequence[Dialogue],
        out_dir: Optional[Path] = None,
        epochs: Optional[int] = None,
    ) -> TrainResult:
        result = TrainResult()
        epochs = self.cfg.epochs if epochs is None else epochs
        params = self.model.task_parameters()
        state = AdamState(lr=self.cfg.lr, weight_decay=self.cfg.weight_decay)
        step = 0
        total = epochs * math.ceil(len(train_seqs) / self.cfg.batch_size)
        for epoch in range(1, epochs + 1):
            losses = []
            n_batches = math.ceil(len(train_seqs) / self.cfg.batch_size)
            batches = _batches(train_seqs, self.cfg.batch_size, self.rng)
            for batch in self._progress(batches, n_batches, f"epoch {epoch}"):
                state.lr = scheduled_lr(self.cfg.lr, step, total, self.cfg.lr_schedule)
                losses.append(self._step(self.model.task_loss, batch, params, state, f"epoch {epoch} step {step}"))
                alpha = self.model.alpha
                if alpha is not None:
                    result.alphas.append(alpha)
                self.metrics.write("step", epoch=epoch, step=step, loss=losses[-1], alpha=alpha, lr=state.lr)
                log.debug("step %d loss=%.4f alpha=%s", step, losses[-1], alpha)
                step += 1

            mean_loss = float(np.mean(losses)) if losses else 0.0
            result.losses.append(mean_loss)
            report = evaluate_dialogues(self.model, dev)[1] if dev else None
            rec = {"epoch": epoch, "loss": mean_loss, "alpha": self.model.alpha}
            if report is not None:
                rec.update(dev_f1_all=report.f1_all, dev_f1_cross=report.f1_cross, dev_f1_intra=report.f1_intra)
            self.metrics.write("epoch", **rec)
            log.info(
                "epoch %d: loss=%.4f dev_f1_all=%s alpha=%s",
                epoch,
                mean_loss,
                f"{report.f1_all:.4f}" if report is not None else "n/a",
                f"{self.model.alpha:.4f}" if self.model.alpha is not None else "n/a",
            )

            better = result.best_dev is None or report is None or report.f1_all > result.best_dev.f1_all
            if better:
                result.best_epoch = epoch
                result.best_dev = report if report is not None else EvalReport()
                if out_dir is not None:
                    result.checkpoint = save_checkpoint(self.model, Path(out_dir) / MODEL_FILE)
        return result


# -----------------
# Inference
# -----------------


def _predict_one(model: PolarModel, dialogue: Dialogue, index: int) -> Dialogue:
    rng = None if model.cfg.deterministic_eval else np.random.default_rng([model.cfg.seed, index])
    return model.predict(dialogue, rng)


def predict_dialogues(model: PolarModel, dialogues: Sequence[Dialogue], workers: Optional[int] = None) -> List[Dialogue]:
    """Decode every dialogue; results keep the input order for any worker count."""
    workers = model.cfg.workers if workers is None else workers
    if workers <= 1 or len(dialogues) <= 1:
        return [_predict_one(model, d, i) for i, d in enumerate(dialogues)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda pair: _predict_one(model, pair[1], pair[0]), enumerate(dialogues)))


def evaluate_dialogues(
    model: PolarModel, gold: Sequence[Dialogue], workers: Optional[int] = None
) -> Tuple[List[Dialogue], EvalReport]:
    preds = predict_dialogues(model, gold, workers)
    return preds, evaluate(preds, gold)


# -----------------
# Run drivers
# -----------------


def _setup(cfg: RunConfig, init: Optional[Path]) -> Tuple[Corpus, Optional[Corpus], PolarModel]:
    cfg.check_paths(["train_path"])
    train = load_corpus(Path(cfg.train_path))
    dev = load_corpus(Path(cfg.dev_path), roles=train.roles) if cfg.dev_path else None
    if init is not None:
        meta = read_meta(init)
        vocab = Vocabulary.load(Path(init).with_name(meta.vocab_file))
    else:
        vocab = Vocabulary.build(train, min_freq=cfg.vocab_min_freq, n_speakers=cfg.n_speakers)
    log.info("vocabulary: %d entries", len(vocab))
    model = PolarModel(cfg, vocab, Tagset.from_roles(train.roles), np.random.default_rng(cfg.seed))
    if init is not None:
        load_encoder_weights(model, init)
    return train, dev, model


def run_psp_pretrain(cfg: RunConfig, out_dir: Path) -> Tuple[Path, float]:
    out_dir = Path(out_dir)
    train, _, model = _setup(cfg, None)
    seqs = [linearize(d) for d in train]
    with MetricsLog(out_dir / METRICS_FILE) as metrics:
        acc = Trainer(model, metrics).pretrain_psp(seqs)
    path = save_checkpoint(model, out_dir / MODEL_FILE, kind="psp")
    return path, acc


def run_training(cfg: RunConfig, out_dir: Path, init: Optional[Path] = None) -> TrainResult:
    out_dir = Path(out_dir)
    train, dev, model = _setup(cfg, init)
    seqs = [linearize(d) for d in train]
    with MetricsLog(out_dir / METRICS_FILE) as metrics:
        trainer = Trainer(model, metrics)
        psp_acc = None
        if not cfg.no_psp and init is None and cfg.psp_epochs > 0:
            psp_acc = trainer.pretrain_psp(seqs)
        result = trainer.train(seqs, dev.dialogues if dev is not None else (), out_dir)
    result.psp_accuracy = psp_acc
    log.info("best epoch %d, dev F1_all %.4f, checkpoint %s", result.best_epoch, result.best_f1, result.checkpoint)
    return result
