"""Training loop: one optimizer step per procedure on the mean entity loss."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import NonFiniteGradientError, SgdConfig
from .data import Procedure
from .model import TrackerModel

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    epoch_losses: list = field(default_factory=list)
    steps: int = 0
    dev_status_accuracy: list = field(default_factory=list)


def status_accuracy(model: TrackerModel, procs: list[Procedure]) -> float:
    from .heads import status_class_of

    total = hit = 0
    for proc in procs:
        timelines, _ = model.predict_procedure(proc, repair=False)
        for entity in proc.entities:
            for pred, gold in zip(timelines[entity], proc.grid[entity]):
                total += 1
                if status_class_of(pred) == status_class_of(gold):
                    hit += 1
    return hit / total if total else 1.0


def train_model(model: TrackerModel, procs: list[Procedure], sgd: SgdConfig,
                epochs: int, seed: int = 0, checkpoint_dir=None,
                dev_procs=None, freeze_timestamps: bool = False,
                eval_every: int = 0,
                stop_fn=None) -> TrainResult:
    """Sequential over procedures; gradients are averaged within a procedure
    and applied as a single SGD step. Aborts on non-finite loss, keeping the
    last epoch's checkpoint on disk.

    `freeze_timestamps` zeroes the time-id table and excludes it from updates
    (the step-blind ablation). `stop_fn(model, epoch)` may end training early.
    """
    if freeze_timestamps:
        model.params["ts_emb"].data[:] = 0.0
        model.params["ts_emb"].requires_grad = False
    rng = np.random.default_rng(seed)
    result = TrainResult()
    for epoch in range(epochs):
        epoch_losses = []
        for proc in procs:
            loss = model.procedure_loss(proc, train=True, rng=rng)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, procedure {proc.id!r}; "
                    f"last checkpoint retained"
                )
            loss.backward()
            try:
                ad.sgd_step(model.params, sgd, result.steps)
            except NonFiniteGradientError as exc:
                raise TrainingDiverged(str(exc)) from exc
            result.steps += 1
            epoch_losses.append(value)
        mean_loss = sum(epoch_losses) / len(epoch_losses)
        result.epoch_losses.append(mean_loss)
        if dev_procs and eval_every and (epoch + 1) % eval_every == 0:
            acc = status_accuracy(model, dev_procs)
            result.dev_status_accuracy.append((epoch, acc))
            log.info("epoch %d: loss %.4f, dev status acc %.3f",
                     epoch, mean_loss, acc)
        else:
            log.info("epoch %d: loss %.4f (lr %.2e)", epoch, mean_loss,
                     sgd.effective_lr(result.steps))
        if checkpoint_dir:
            model.save(checkpoint_dir)
        if stop_fn is not None and stop_fn(model, epoch):
            log.info("early stop at epoch %d", epoch)
            break
    return result
