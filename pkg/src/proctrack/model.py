"""Full model: vocabulary + encoder + heads, with procedure-level helpers."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import Procedure
from .encoder import EncoderConfig, embed, encode, init_encoder_params
from .heads import (
    GoldStep, SpanPrediction, StatusPrediction, init_head_params, joint_loss,
    resolve_gold_span, span_head, status_class_of, status_head,
)
from .inference import (
    DecodedState, decode_step, decode_step_unfiltered, repair_timeline,
    violates_rules,
)
from .inputs import QueryLayout, build_query, timestamp
from .tokenizer import Vocab, build_vocab, tokenize


def vocab_from_procedures(procs: list[Procedure]) -> Vocab:
    corpus = []
    for p in procs:
        for e in p.entities:
            corpus.append(["where", "is", "?"])
            corpus.append(e.split(";")[0].strip().split())
        corpus.extend(p.sentences)
    return build_vocab(corpus)


@dataclass
class TrackerModel:
    vocab: Vocab
    config: EncoderConfig
    params: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, vocab: Vocab, config: EncoderConfig, seed: int) -> "TrackerModel":
        config.vocab_size = len(vocab)
        rng = np.random.default_rng(seed)
        params = init_encoder_params(config, rng)
        params.update(init_head_params(config.d_model, rng))
        return cls(vocab=vocab, config=config, params=params)

    # -- persistence --------------------------------------------------------

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        ad.save_checkpoint(self.params, os.path.join(directory, "params.json"))
        self.config.save(os.path.join(directory, "config.json"))
        self.vocab.save(os.path.join(directory, "vocab.json"))

    @classmethod
    def load(cls, directory) -> "TrackerModel":
        vocab = Vocab.load(os.path.join(directory, "vocab.json"))
        config = EncoderConfig.load(os.path.join(directory, "config.json"))
        params = ad.load_checkpoint(os.path.join(directory, "params.json"))
        if config.vocab_size != len(vocab):
            raise ValueError(
                f"checkpoint vocab size {config.vocab_size} does not match "
                f"vocab file with {len(vocab)} entries"
            )
        return cls(vocab=vocab, config=config, params=params)

    # -- forward ------------------------------------------------------------

    def layout_for(self, entity: str, proc: Procedure) -> QueryLayout:
        return build_query(entity, proc.sentences, self.vocab,
                           max_len=self.config.max_len)

    def forward(self, layout: QueryLayout, step: int, train: bool = False,
                rng: np.random.Generator | None = None
                ) -> tuple[StatusPrediction, SpanPrediction]:
        ts = timestamp(layout, step)
        out = encode(embed(ts, self.params), self.params, self.config,
                     train=train, rng=rng)
        return (status_head(out, self.params["head.status"]),
                span_head(out, self.params["head.start"], self.params["head.end"]))

    # -- training targets ---------------------------------------------------

    def gold_steps(self, proc: Procedure, entity: str, layout: QueryLayout):
        """GoldStep per step 0..n, with spans mapped to layout positions."""
        g2l = layout.layout_pos_of_paragraph()
        paragraph = proc.paragraph
        steps, unaligned = [], 0
        for value in proc.grid[entity]:
            cls = status_class_of(value)
            span = None
            if cls == 2:
                g = resolve_gold_span(tokenize(value), paragraph)
                if g is None:
                    unaligned += 1
                else:
                    span = (g2l[g[0]], g2l[g[1]])
            steps.append(GoldStep(status_class=cls, span=span))
        return steps, unaligned

    def procedure_loss(self, proc: Procedure, train: bool = True,
                       rng: np.random.Generator | None = None) -> Tensor:
        """Mean joint loss over every (entity, step 0..n) pair."""
        losses = []
        for entity in proc.entities:
            layout = self.layout_for(entity, proc)
            golds, _ = self.gold_steps(proc, entity, layout)
            for step, gold in enumerate(golds):
                status, span = self.forward(layout, step, train=train, rng=rng)
                losses.append(joint_loss(status, span, gold))
        return ad.mean_of(losses)

    # -- prediction ---------------------------------------------------------

    def candidate_layout_spans(self, proc: Procedure, layout: QueryLayout):
        g2l = layout.layout_pos_of_paragraph()
        return [(g2l[s], g2l[e]) for s, e in proc.candidate_spans]

    def predict_entity(self, proc: Procedure, entity: str,
                       np_filter: bool = True, repair: bool = True):
        """Timeline of location values over steps 0..n for one entity.

        Returns (timeline, flagged_count, violation_count_before_repair).
        """
        layout = self.layout_for(entity, proc)
        candidates = self.candidate_layout_spans(proc, layout)
        l2text = layout.tokens
        para_positions = [i for i, g in enumerate(layout.paragraph_index)
                          if g is not None]

        def span_text(s, e):
            return " ".join(l2text[s:e + 1])

        raw, flagged = [], 0
        for step in range(proc.n_steps + 1):
            status, span = self.forward(layout, step, train=False)
            if np_filter:
                state = decode_step(status, span, candidates, span_text)
            else:
                state = decode_step_unfiltered(status, span, span_text,
                                               para_positions)
            if state.flagged:
                flagged += 1
            raw.append(state.value)
        violations = int(violates_rules(raw))
        timeline = repair_timeline(raw) if repair else raw
        return timeline, flagged, violations

    def predict_procedure(self, proc: Procedure, np_filter: bool = True,
                          repair: bool = True):
        """Timelines for all entities. Returns (timelines, stats dict)."""
        timelines, flagged = {}, 0
        violations = 0
        for entity in proc.entities:
            tl, fl, vi = self.predict_entity(proc, entity, np_filter=np_filter,
                                             repair=repair)
            timelines[entity] = tl
            flagged += fl
            violations += vi
        return timelines, {"flagged": flagged, "rule_violations": violations}
