"""Whitespace tokenizer and word-level vocabulary with reserved special tokens."""

from __future__ import annotations

import json

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
RESERVED = {PAD: 0, UNK: 1, CLS: 2, SEP: 3}

_TRAILING_PUNCT = ".,?!;"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, detach trailing .,?!; as own tokens."""
    tokens = []
    for chunk in text.lower().split():
        tail = []
        while chunk and chunk[-1] in _TRAILING_PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(tail))
    return tokens


class Vocab:
    """Immutable token<->id map. Ids 0-3 are reserved for the special tokens."""

    def __init__(self, token_to_id: dict[str, int]):
        for tok, i in RESERVED.items():
            if token_to_id.get(tok) != i:
                raise ValueError(f"vocab must map {tok} to {i}")
        self._token_to_id = dict(token_to_id)
        self._id_to_token = {i: t for t, i in token_to_id.items()}
        if len(self._id_to_token) != len(self._token_to_id):
            raise ValueError("vocab ids must be unique")

    def __len__(self):
        return len(self._token_to_id)

    def __contains__(self, token):
        return token in self._token_to_id

    def encode(self, token: str) -> int:
        return self._token_to_id.get(token, RESERVED[UNK])

    def encode_all(self, tokens) -> list[int]:
        return [self.encode(t) for t in tokens]

    def decode(self, idx: int) -> str:
        return self._id_to_token[idx]

    def as_dict(self) -> dict[str, int]:
        return dict(self._token_to_id)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self._token_to_id, f, ensure_ascii=False, indent=0)

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))


def build_vocab(corpus) -> Vocab:
    """Assign ids in first-seen order after the reserved ids.

    `corpus` is an iterable of token lists (or of plain tokens).
    """
    mapping = dict(RESERVED)
    for item in corpus:
        tokens = [item] if isinstance(item, str) else item
        for tok in tokens:
            if tok not in mapping:
                mapping[tok] = len(mapping)
    return Vocab(mapping)
