"""Prediction heads: 3-way status over [CLS] and start/end span distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoder import EncoderOutput

# Fixed class order for entity status.
STATUS_GONE, STATUS_UNKNOWN, STATUS_KNOWN = 0, 1, 2
STATUS_NAMES = ("non-existence", "unknown-location", "known-location")


def status_class_of(value: str) -> int:
    if value == "-":
        return STATUS_GONE
    if value == "?":
        return STATUS_UNKNOWN
    return STATUS_KNOWN


@dataclass
class StatusPrediction:
    probs_t: Tensor  # shape (3,)

    @property
    def probs(self) -> np.ndarray:
        return self.probs_t.data

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.probs_t.data))


@dataclass
class SpanPrediction:
    start_t: Tensor  # shape (T,)
    end_t: Tensor  # shape (T,)

    @property
    def start_probs(self) -> np.ndarray:
        return self.start_t.data

    @property
    def end_probs(self) -> np.ndarray:
        return self.end_t.data


@dataclass
class GoldStep:
    status_class: int
    span: tuple[int, int] | None = None  # layout positions, inclusive


def status_head(output: EncoderOutput, w: Tensor) -> StatusPrediction:
    if w.data.shape[0] != output.hidden.data.shape[1] or w.data.shape[1] != 3:
        raise ad.ShapeMismatchError(
            f"status weight must be d_model x 3, got {w.data.shape}"
        )
    logits = ad.reshape(ad.matmul(output.cls, w), (3,))
    return StatusPrediction(probs_t=ad.softmax(logits, axis=-1))


def span_head(output: EncoderOutput, w_start: Tensor, w_end: Tensor) -> SpanPrediction:
    T, d = output.hidden.data.shape
    for w in (w_start, w_end):
        if w.data.shape != (d, 1):
            raise ad.ShapeMismatchError(
                f"span weight must be d_model x 1, got {w.data.shape}"
            )
    start = ad.softmax(ad.reshape(ad.matmul(output.hidden, w_start), (T,)), axis=-1)
    end = ad.softmax(ad.reshape(ad.matmul(output.hidden, w_end), (T,)), axis=-1)
    return SpanPrediction(start_t=start, end_t=end)


def joint_loss(status: StatusPrediction, span: SpanPrediction, gold: GoldStep) -> Tensor:
    """Status cross-entropy, plus start+end cross-entropy when gold has a span.

    Gold steps whose location text could not be aligned to the paragraph have
    gold.span = None; their span terms are skipped (callers flag them).
    """
    loss = ad.cross_entropy(status.probs_t, gold.status_class)
    if gold.status_class == STATUS_KNOWN and gold.span is not None:
        s, e = gold.span
        loss = ad.add(loss, ad.cross_entropy(span.start_t, s))
        loss = ad.add(loss, ad.cross_entropy(span.end_t, e))
    return loss


def init_head_params(d_model: int, rng: np.random.Generator) -> dict:
    return {
        "head.status": Tensor(rng.normal(0.0, 0.02, (d_model, 3)),
                              requires_grad=True, name="head.status"),
        "head.start": Tensor(rng.normal(0.0, 0.02, (d_model, 1)),
                             requires_grad=True, name="head.start"),
        "head.end": Tensor(rng.normal(0.0, 0.02, (d_model, 1)),
                           requires_grad=True, name="head.end"),
    }


def resolve_gold_span(location_tokens: list[str], paragraph: list[str]):
    """First exact token-sequence occurrence of the location in the paragraph.

    Returns (start, end) paragraph-global inclusive indices, or None.
    """
    k = len(location_tokens)
    if k == 0:
        return None
    for i in range(len(paragraph) - k + 1):
        if paragraph[i:i + k] == location_tokens:
            return (i, i + k - 1)
    return None
