"""Built-in demo data: a small photosynthesis procedure with a full gold grid.

Used by tests and as a quick-start dataset for the CLI.
"""

from __future__ import annotations

from .data import Procedure, candidate_spans_from_grid
from .tokenizer import tokenize

_SENTENCES = [
    "Roots absorb water from soil",
    "The water flows to the leaf",
    "Light from the sun and CO2 enter the leaf",
    "The water, light, and CO2 combine into a mixture",
    "Mixture forms sugar",
]

_GRID = {
    "water": ["soil", "root", "leaf", "leaf", "-", "-"],
    "light": ["sun", "sun", "sun", "leaf", "-", "-"],
    "co2": ["?", "?", "?", "leaf", "-", "-"],
    "mixture": ["-", "-", "-", "-", "leaf", "-"],
    "sugar": ["-", "-", "-", "-", "-", "leaf"],
}


def photosynthesis() -> Procedure:
    sentences = [tokenize(s) for s in _SENTENCES]
    spans, missing = candidate_spans_from_grid(sentences, _GRID)
    return Procedure(
        id="photosynthesis",
        sentences=sentences,
        entities=list(_GRID),
        grid={e: list(tl) for e, tl in _GRID.items()},
        candidate_spans=spans,
        unresolved_locations=missing,
    )
