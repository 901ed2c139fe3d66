"""Training loop: Adam with linear warmup/decay, dev-F1 early stopping."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .data import Sentence
from .metrics import EvalReport, evaluate_tags
from .model import NFLAT
from .tensor import Tensor


class TrainingError(RuntimeError):
    """Raised when training diverges; carries a dump of the offending batch."""


class Adam:
    """Adaptive-moment optimizer over named parameter tensors."""

    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.t = 0

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correct1 = 1.0 - b1 ** self.t
        correct2 = 1.0 - b2 ** self.t
        for key, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[key] = b1 * self.m[key] + (1 - b1) * g
            self.v[key] = b2 * self.v[key] + (1 - b2) * (g * g)
            m_hat = self.m[key] / correct1
            v_hat = self.v[key] / correct2
            p.data -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)


def lr_schedule(step: int, total_steps: int, base_lr: float, warmup_ratio: float) -> float:
    """Linear warmup over warmup_ratio * total_steps, then linear decay."""
    if total_steps <= 0:
        return base_lr
    warm = warmup_ratio * total_steps
    if warm > 0 and step < warm:
        return base_lr * (step + 1) / warm
    if total_steps <= warm:
        return base_lr
    return base_lr * (total_steps - step) / (total_steps - warm)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    dev: EvalReport
    lr: float
    wall_seconds: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "loss": self.loss,
                "dev_precision": self.dev.precision,
                "dev_recall": self.dev.recall,
                "dev_f1": self.dev.f1,
                "lr": self.lr,
                "wall_seconds": self.wall_seconds,
            }
        )


def evaluate(model: NFLAT, sentences: list[Sentence], batch_size: int = 16,
             workers: int = 1) -> EvalReport:
    """Entity-level micro P/R/F1 of model predictions against gold tags."""
    labeled = [s for s in sentences]
    if any(s.labels is None for s in labeled):
        raise ValueError("evaluation needs labeled sentences")
    pred = model.predict(labeled, batch_size=batch_size, workers=workers)
    gold = [s.labels for s in labeled]
    return evaluate_tags(gold, pred, scheme=model.schema.scheme)


def _batches(indices: np.ndarray, batch_size: int):
    for i in range(0, len(indices), batch_size):
        yield indices[i : i + batch_size]


def train(
    model: NFLAT,
    train_sentences: list[Sentence],
    dev_sentences: list[Sentence],
    config: ModelConfig | None = None,
    metrics_log=None,
    quiet: bool = True,
) -> list[EpochRecord]:
    """Minimize mean CRF NLL; keeps the best-dev parameters in the model.

    Args:
        metrics_log: optional writable text stream; receives one JSON object
            per line (a config echo first, then one line per epoch).

    Returns:
        Per-epoch records (loss, dev scores, lr, wall seconds).

    Raises:
        TrainingError: on NaN loss, with the offending batch in the message.
    """
    cfg = config or model.config
    if not train_sentences:
        raise ValueError("training corpus is empty")
    opt = Adam(model.parameters())
    rng = model.rng
    steps_per_epoch = math.ceil(len(train_sentences) / cfg.batch_size)
    total_steps = max(1, cfg.epochs * steps_per_epoch)
    if metrics_log is not None:
        metrics_log.write(json.dumps({"config": cfg.to_dict()}) + "\n")

    history: list[EpochRecord] = []
    best_f1 = -1.0
    best_state: dict[str, np.ndarray] | None = None
    stale = 0
    step = 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_sentences))
        losses = []
        lr = cfg.lr
        for batch_idx in _batches(order, cfg.batch_size):
            sents = [train_sentences[i] for i in batch_idx]
            batch = model.encode_batch(sents)
            loss = model.loss(batch, training=True)
            value = loss.item()
            if not np.isfinite(value):
                dump = ", ".join(f"{s.sid}:{s.chars[:20]!r}" for s in sents)
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch} step {step}; "
                    f"batch sentences: {dump}"
                )
            losses.append(value)
            opt.zero_grad()
            loss.backward()
            lr = lr_schedule(step, total_steps, cfg.lr, cfg.warmup)
            opt.step(lr)
            step += 1
        opt.zero_grad()
        dev_report = (
            evaluate(model, dev_sentences, workers=cfg.workers)
            if dev_sentences
            else evaluate(model, train_sentences, workers=cfg.workers)
        )
        record = EpochRecord(
            epoch=epoch,
            loss=float(np.mean(losses)) if losses else 0.0,
            dev=dev_report,
            lr=lr,
            wall_seconds=time.perf_counter() - t0,
        )
        history.append(record)
        if metrics_log is not None:
            metrics_log.write(record.to_json() + "\n")
            metrics_log.flush()
        if not quiet:
            print(
                f"epoch {epoch:3d}  loss {record.loss:8.4f}  "
                f"dev F1 {dev_report.f1:.4f}  lr {lr:.2e}"
            )
        if dev_report.f1 > best_f1:
            best_f1 = dev_report.f1
            best_state = {k: p.data.copy() for k, p in model.parameters().items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if best_state is not None:
        for key, p in model.parameters().items():
            p.data = best_state[key]
    return history
