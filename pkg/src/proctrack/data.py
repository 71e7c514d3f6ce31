"""Dataset schema, loaders, TSV grid converter, and a synthetic generator.

Canonical JSON form: a list of objects
    {"id": str, "sentences": [[token, ...], ...], "entities": [str, ...],
     "grid": {entity: [state0, ..., stateN]}, "candidate_spans": [[s, e], ...]}
Grid values are "-", "?", or lowercase location text. Candidate span indices
are paragraph-global, 0-based, inclusive.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

from .inference import violates_rules
from .tokenizer import tokenize

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Schema or consistency problem in a dataset file; message carries a path."""


@dataclass
class Procedure:
    id: str
    sentences: list  # list of token lists
    entities: list
    grid: dict  # entity -> list of n+1 location values
    candidate_spans: list = field(default_factory=list)  # (start, end) global
    unresolved_locations: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.sentences)

    @property
    def paragraph(self) -> list[str]:
        return [tok for sent in self.sentences for tok in sent]

    def timeline(self, entity: str) -> list[str]:
        return list(self.grid[entity])

    def is_input(self, entity: str) -> bool:
        return self.grid[entity][0] != "-"

    def span_text(self, start: int, end: int) -> str:
        return " ".join(self.paragraph[start:end + 1])


def _normalize(value: str) -> str:
    value = value.strip().casefold()
    return value if value else "-"


def find_token_occurrences(needle: list[str], paragraph: list[str]) -> list[tuple[int, int]]:
    k = len(needle)
    return [(i, i + k - 1) for i in range(len(paragraph) - k + 1)
            if paragraph[i:i + k] == needle]


def candidate_spans_from_grid(sentences, grid):
    """Occurrences of every gold text location in the paragraph.

    Returns (sorted spans, locations that never occur verbatim).
    """
    paragraph = [tok for sent in sentences for tok in sent]
    spans, missing = set(), []
    seen = set()
    for timeline in grid.values():
        for value in timeline:
            if value in ("-", "?") or value in seen:
                continue
            seen.add(value)
            occ = find_token_occurrences(tokenize(value), paragraph)
            if occ:
                spans.update(occ)
            else:
                missing.append(value)
    return sorted(spans), sorted(missing)


def validate_procedure(proc: Procedure, path: str = "") -> None:
    n = proc.n_steps
    if n == 0:
        raise DataError(f"{path}.sentences: procedure has no sentences")
    if not proc.entities:
        raise DataError(f"{path}.entities: procedure has no entities")
    if set(proc.grid) != set(proc.entities):
        raise DataError(f"{path}.grid: grid entities do not match entity list")
    for entity, timeline in proc.grid.items():
        if len(timeline) != n + 1:
            raise DataError(
                f"{path}.grid.{entity}: expected {n + 1} values "
                f"(state 0 through state {n}), got {len(timeline)}"
            )
    para_len = len(proc.paragraph)
    for i, (s, e) in enumerate(proc.candidate_spans):
        if not (0 <= s <= e < para_len):
            raise DataError(
                f"{path}.candidate_spans[{i}]: span ({s}, {e}) outside "
                f"paragraph of {para_len} tokens"
            )


def _proc_from_obj(obj: dict, path: str) -> Procedure:
    required = {"id", "sentences", "entities", "grid"}
    missing = required - set(obj)
    if missing:
        raise DataError(f"{path}: missing keys {sorted(missing)}")
    unknown = set(obj) - required - {"candidate_spans"}
    if unknown:
        raise DataError(f"{path}: unknown keys {sorted(unknown)}")
    grid = {e: [_normalize(v) for v in tl] for e, tl in obj["grid"].items()}
    proc = Procedure(
        id=str(obj["id"]),
        sentences=[list(s) for s in obj["sentences"]],
        entities=list(obj["entities"]),
        grid=grid,
        candidate_spans=[tuple(sp) for sp in obj.get("candidate_spans", [])],
    )
    if not proc.candidate_spans:
        proc.candidate_spans, proc.unresolved_locations = candidate_spans_from_grid(
            proc.sentences, proc.grid)
    else:
        _, proc.unresolved_locations = candidate_spans_from_grid(
            proc.sentences, proc.grid)
    validate_procedure(proc, path)
    return proc


def load_procedures(path) -> list[Procedure]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise DataError("$: top level must be a list of procedures")
    return [_proc_from_obj(obj, f"$[{i}]") for i, obj in enumerate(data)]


def save_procedures(procs: list[Procedure], path) -> None:
    data = [
        {
            "id": p.id,
            "sentences": p.sentences,
            "entities": p.entities,
            "grid": p.grid,
            "candidate_spans": [list(sp) for sp in p.candidate_spans],
        }
        for p in procs
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=1)


# ---------------------------------------------------------------------------
# Grid-style TSV ingestion: one block per process, blank-line separated.
# Header row: process id, then entity names. One row per state: first cell
# "state<k>", second cell the sentence text ("" for state0), then one
# location value per entity.
# ---------------------------------------------------------------------------

def load_grid_tsv(path) -> list[Procedure]:
    with open(path, encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f]
    blocks, cur = [], []
    for line in lines:
        if line.strip():
            cur.append(line)
        elif cur:
            blocks.append(cur)
            cur = []
    if cur:
        blocks.append(cur)

    procs = []
    for b, block in enumerate(blocks):
        where = f"{path}:block{b}"
        header = block[0].split("\t")
        if len(header) < 2:
            raise DataError(f"{where}: header needs a process id and >=1 entity")
        pid, entities = header[0], header[1:]
        sentences, columns = [], {e: [] for e in entities}
        for k, line in enumerate(block[1:]):
            cells = line.split("\t")
            if cells[0] != f"state{k}":
                raise DataError(f"{where}: expected row 'state{k}', got {cells[0]!r}")
            if len(cells) != len(entities) + 2:
                raise DataError(
                    f"{where}.state{k}: expected {len(entities) + 2} cells, "
                    f"got {len(cells)}"
                )
            if k > 0:
                sentences.append(tokenize(cells[1]))
            for e, v in zip(entities, cells[2:]):
                columns[e].append(_normalize(v))
        spans, missing = candidate_spans_from_grid(sentences, columns)
        proc = Procedure(id=pid, sentences=sentences, entities=entities,
                         grid=columns, candidate_spans=spans,
                         unresolved_locations=missing)
        validate_procedure(proc, where)
        procs.append(proc)
    return procs


def save_grid_tsv(procs: list[Procedure], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in procs:
            f.write("\t".join([p.id, *p.entities]) + "\n")
            for k in range(p.n_steps + 1):
                sentence = " ".join(p.sentences[k - 1]) if k > 0 else ""
                cells = [f"state{k}", sentence] + [p.grid[e][k] for e in p.entities]
                f.write("\t".join(cells) + "\n")
            f.write("\n")


# ---------------------------------------------------------------------------
# Recipe-style ingestion: per-step ingredient location annotations; steps
# without an annotation carry the previous location forward.
# ---------------------------------------------------------------------------

def load_recipe_annotations(path) -> list[Procedure]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise DataError("$: top level must be a list of recipes")
    procs = []
    for i, obj in enumerate(data):
        where = f"$[{i}]"
        for key in ("id", "sentences", "ingredients", "locations"):
            if key not in obj:
                raise DataError(f"{where}: missing key {key!r}")
        sentences = [tokenize(s) if isinstance(s, str) else list(s)
                     for s in obj["sentences"]]
        n = len(sentences)
        entities, grid = [], {}
        for name in obj["ingredients"]:
            ann = obj["locations"].get(name)
            if not ann:
                log.warning("%s: ingredient %r has no location annotations; skipped",
                            obj["id"], name)
                continue
            ann = {int(k): _normalize(v) for k, v in ann.items()}
            timeline = [ann.get(0, "?")]
            for step in range(1, n + 1):
                timeline.append(ann.get(step, timeline[-1]))
            entities.append(name)
            grid[name] = timeline
        spans, missing = candidate_spans_from_grid(sentences, grid)
        proc = Procedure(id=str(obj["id"]), sentences=sentences, entities=entities,
                         grid=grid, candidate_spans=spans,
                         unresolved_locations=missing)
        validate_procedure(proc, where)
        procs.append(proc)
    return procs


# ---------------------------------------------------------------------------
# Synthetic corpus generator.
# ---------------------------------------------------------------------------

ENTITY_POOL = ("water", "sand", "salt", "vapor", "dough", "seed",
               "smoke", "juice", "paste", "ash", "mud", "resin")
LOCATION_POOL = ("soil", "oven", "bowl", "river", "field", "tank",
                 "cloud", "pot", "tray", "mill")


@dataclass
class GrammarConfig:
    min_entities: int = 2
    max_entities: int = 3
    min_steps: int = 3
    max_steps: int = 5
    entity_pool: tuple = ENTITY_POOL
    location_pool: tuple = LOCATION_POOL
    combine_prob: float = 0.25
    destroy_prob: float = 0.2


def generate_synthetic(seed: int, n_procedures: int,
                       grammar: GrammarConfig | None = None) -> list[Procedure]:
    """Template-generated procedures with exactly derivable gold grids.

    Every text location in a grid occurs verbatim in its paragraph, and every
    grid satisfies the create/destroy consistency rules by construction.
    """
    g = grammar or GrammarConfig()
    rng = random.Random(seed)
    procs = []
    for idx in range(n_procedures):
        n_entities = rng.randint(g.min_entities, g.max_entities)
        names = rng.sample(g.entity_pool, min(n_entities + 2, len(g.entity_pool)))
        entities, spare = names[:n_entities], names[n_entities:]
        n_steps = rng.randint(g.min_steps, g.max_steps)

        state = {}
        created, destroyed = set(), set()
        for e in entities:
            if rng.random() < 0.3:
                state[e] = "-"  # will need creation
            else:
                state[e] = "?"  # input with unknown starting location
        grid = {e: [state[e]] for e in entities}
        sentences = []

        for _ in range(n_steps):
            alive = [e for e in entities if state[e] != "-"]
            dead_fresh = [e for e in entities
                          if state[e] == "-" and e not in created and e not in destroyed]
            sentence = None
            r = rng.random()
            if len(alive) >= 2 and spare and r < g.combine_prob:
                x, y = rng.sample(alive, 2)
                z = spare.pop()
                loc = rng.choice(g.location_pool)
                sentence = ["the", x, "and", "the", y, "combine",
                            "into", z, "at", "the", loc, "."]
                state[x] = state[y] = "-"
                destroyed.update((x, y))
                entities.append(z)
                grid[z] = ["-"] * len(grid[entities[0]])
                state[z] = loc
                created.add(z)
            elif alive and r < g.combine_prob + g.destroy_prob:
                x = rng.choice(alive)
                sentence = ["the", x, "is", "destroyed", "."]
                state[x] = "-"
                destroyed.add(x)
            elif dead_fresh and r < g.combine_prob + g.destroy_prob + 0.2:
                x = rng.choice(dead_fresh)
                loc = rng.choice(g.location_pool)
                sentence = ["a", x, "appears", "at", "the", loc, "."]
                state[x] = loc
                created.add(x)
            elif alive:
                x = rng.choice(alive)
                loc = rng.choice([l for l in g.location_pool if l != state[x]])
                sentence = ["the", x, "moves", "to", "the", loc, "."]
                state[x] = loc
            else:
                sentence = ["nothing", "happens", "."]
            sentences.append(sentence)
            for e in entities:
                grid[e].append(state[e])

        spans, missing = candidate_spans_from_grid(sentences, grid)
        assert not missing, "generator must only use locations present in text"
        procs.append(Procedure(id=f"proc{idx:04d}", sentences=sentences,
                               entities=entities, grid=grid,
                               candidate_spans=spans))
    for p in procs:
        for e in p.entities:
            assert not violates_rules(p.grid[e])
    return procs
