"""Micro transformer encoder with token + position + time-id embeddings.

Pre-norm residual blocks, per-head attention projections, GELU feedforward,
and a final layer norm. The time-id table starts at zero so a fresh model is
step-agnostic until training moves it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .inputs import TimestampedInput

N_TIMESTAMPS = 4


@dataclass
class EncoderConfig:
    d_model: int = 32
    n_heads: int = 2
    n_layers: int = 2
    d_ff: int = 64
    vocab_size: int = 0
    max_len: int = 256
    n_timestamps: int = N_TIMESTAMPS
    dropout: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}"
            )
        if self.n_timestamps != N_TIMESTAMPS:
            raise ValueError("time-id table must have exactly 4 rows")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2)

    @classmethod
    def load(cls, path) -> "EncoderConfig":
        with open(path, encoding="utf-8") as f:
            return cls(**json.load(f))


@dataclass
class EncoderOutput:
    hidden: Tensor  # T x d_model
    attn_probs: list = field(default_factory=list)  # per (layer, head) ndarray

    @property
    def cls(self) -> Tensor:
        """The [CLS] row as a 1 x d_model tensor."""
        return ad.slice_rows(self.hidden, 0, 1)


def init_encoder_params(config: EncoderConfig, rng: np.random.Generator) -> dict:
    """Parameter dict for embeddings and all encoder layers.

    The time-id embedding table is zero-initialized on purpose.
    """
    d, dh, ff = config.d_model, config.d_model // config.n_heads, config.d_ff

    def normal(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    params = {
        "token_emb": normal(config.vocab_size, d),
        "pos_emb": normal(config.max_len, d),
        "ts_emb": np.zeros((N_TIMESTAMPS, d)),
    }
    for l in range(config.n_layers):
        p = f"layer{l}."
        params[p + "ln1.gain"] = np.ones(d)
        params[p + "ln1.bias"] = np.zeros(d)
        for h in range(config.n_heads):
            params[p + f"attn.q{h}"] = normal(d, dh)
            params[p + f"attn.k{h}"] = normal(d, dh)
            params[p + f"attn.v{h}"] = normal(d, dh)
        params[p + "attn.out"] = normal(d, d)
        params[p + "attn.out_bias"] = np.zeros(d)
        params[p + "ln2.gain"] = np.ones(d)
        params[p + "ln2.bias"] = np.zeros(d)
        params[p + "ff.w1"] = normal(d, ff)
        params[p + "ff.b1"] = np.zeros(ff)
        params[p + "ff.w2"] = normal(ff, d)
        params[p + "ff.b2"] = np.zeros(d)
    params["final_ln.gain"] = np.ones(d)
    params["final_ln.bias"] = np.zeros(d)
    return {k: Tensor(v, requires_grad=True, name=k) for k, v in params.items()}


def embed(inp: TimestampedInput, params: dict) -> Tensor:
    """Sum of token, position, and time-id embeddings, one row per token."""
    tok = ad.embedding(params["token_emb"], inp.layout.token_ids)
    pos = ad.embedding(params["pos_emb"], inp.layout.position_ids)
    ts = ad.embedding(params["ts_emb"], inp.timestamp_ids)
    return ad.add(ad.add(tok, pos), ts)


def _dropout(x: Tensor, rate: float, rng) -> Tensor:
    if rate <= 0.0 or rng is None:
        return x
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return ad.scale(x, mask)


def encode(embedded: Tensor, params: dict, config: EncoderConfig,
           train: bool = False, rng: np.random.Generator | None = None,
           collect_attn: bool = False) -> EncoderOutput:
    T = embedded.data.shape[0]
    if T > config.max_len:
        raise ValueError(f"sequence length {T} exceeds max length {config.max_len}")
    dh = config.d_model // config.n_heads
    drop_rng = rng if train else None
    x = embedded
    attn_probs = []
    for l in range(config.n_layers):
        p = f"layer{l}."
        h = ad.layer_norm(x, params[p + "ln1.gain"], params[p + "ln1.bias"])
        heads = []
        for hd in range(config.n_heads):
            q = ad.matmul(h, params[p + f"attn.q{hd}"])
            k = ad.matmul(h, params[p + f"attn.k{hd}"])
            v = ad.matmul(h, params[p + f"attn.v{hd}"])
            scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / np.sqrt(dh))
            probs = ad.softmax(scores, axis=-1)
            if collect_attn:
                attn_probs.append(probs.data.copy())
            heads.append(ad.matmul(probs, v))
        merged = ad.concat(heads, axis=1)
        attn_out = ad.add(ad.matmul(merged, params[p + "attn.out"]),
                          params[p + "attn.out_bias"])
        x = ad.add(x, _dropout(attn_out, config.dropout, drop_rng))
        h = ad.layer_norm(x, params[p + "ln2.gain"], params[p + "ln2.bias"])
        ff = ad.add(ad.matmul(ad.gelu(
            ad.add(ad.matmul(h, params[p + "ff.w1"]), params[p + "ff.b1"])
        ), params[p + "ff.w2"]), params[p + "ff.b2"])
        x = ad.add(x, _dropout(ff, config.dropout, drop_rng))
    x = ad.layer_norm(x, params["final_ln.gain"], params["final_ln.bias"])
    return EncoderOutput(hidden=x, attn_probs=attn_probs)
