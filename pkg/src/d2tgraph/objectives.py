"""Training examples for struct denoising and graph-to-text, plus a synthetic corpus."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import UnifiedGraph
from .linearize import EOS, LinearizedInput, Vocab, build_prefixes, linearize, sentinel_id, tokenize, NUM_SENTINELS
from .matrices import (bucket_positions, build_attention_matrix, build_position_matrix,
                       neutral_matrices, to_additive_mask)
from .unify import DatasetKind, KgRecord, KvRecord, RawRecord, TableRecord, record_from_dict, record_to_dict


class Objective(str, Enum):
    STRUCT_DENOISE = "StructDenoise"
    G2T = "G2T"


@dataclass(frozen=True)
class MatrixOptions:
    structure: bool = True      # False -> all-ones attention, sequential offsets
    gap_collapse: bool = True
    num_buckets: int = 32
    max_distance: int = 128


@dataclass
class TrainingExample:
    input: LinearizedInput
    buckets: np.ndarray
    add_mask: np.ndarray
    target_ids: list[int]
    objective: Objective
    masked_nodes: tuple[int, ...] = ()


@dataclass(frozen=True)
class NoiseSpec:
    mask_rate: float = 0.15
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_rate < 1.0:
            raise ValueError("mask_rate must lie in (0, 1)")


def structure_matrices(lin: LinearizedInput, g: UnifiedGraph, opts: MatrixOptions = MatrixOptions()):
    if opts.structure:
        pos = build_position_matrix(lin, g, gap_collapse=opts.gap_collapse)
        att = build_attention_matrix(lin, g)
    else:
        pos, att = neutral_matrices(len(lin))
    return bucket_positions(pos, opts.num_buckets, opts.max_distance), to_additive_mask(att)


def mask_count(n_nodes: int, rate: float) -> int:
    return min(n_nodes, math.ceil(rate * n_nodes))


def choose_masked_nodes(g: UnifiedGraph, spec: NoiseSpec) -> tuple[int, ...]:
    n = len(g.nodes)
    if n == 0:
        raise ValueError("cannot noise a graph with no nodes")
    k = mask_count(n, spec.mask_rate)
    if k > NUM_SENTINELS:
        raise ValueError(f"{k} masked nodes exceed the sentinel budget of {NUM_SENTINELS}")
    rng = np.random.default_rng(spec.rng_seed)
    return tuple(sorted(int(x) for x in rng.choice(n, size=k, replace=False)))


def apply_struct_noise(g: UnifiedGraph, r: RawRecord, spec: NoiseSpec, v: Vocab,
                       opts: MatrixOptions = MatrixOptions(), masked: Optional[Sequence[int]] = None,
                       max_len: Optional[int] = None) -> TrainingExample:
    """Replace the text of ~mask_rate of the nodes by sentinels; target lists the originals.

    Matrices come from the original edge set, so connectivity survives the
    noise. ``masked`` overrides the seeded node choice.
    """
    masked = tuple(sorted(masked)) if masked is not None else choose_masked_nodes(g, spec)
    if not masked:
        raise ValueError("no nodes masked")
    repl = {node: [sentinel_id(k)] for k, node in enumerate(masked)}
    lin = linearize(g, build_prefixes(r), v, replacements=repl, max_len=max_len)
    target: list[int] = []
    for k, node in enumerate(masked):
        target.append(sentinel_id(k))
        target.extend(tokenize(g.nodes[node].text, v))
    target.append(EOS)
    buckets, mask = structure_matrices(lin, g, opts)
    return TrainingExample(lin, buckets, mask, target, Objective.STRUCT_DENOISE, masked)


def restore_noised(noised: LinearizedInput, target_ids: Sequence[int]) -> list[int]:
    """Substitute each target segment back into its sentinel slot."""
    segments: dict[int, list[int]] = {}
    cur = None
    for t in target_ids:
        if t == EOS:
            break
        if sentinel_id(0) <= t < sentinel_id(0) + NUM_SENTINELS:
            cur = t
            segments[cur] = []
        elif cur is not None:
            segments[cur].append(t)
    out: list[int] = []
    for t in noised.token_ids:
        out.extend(segments[t] if t in segments else [t])
    return out


def make_g2t_example(g: UnifiedGraph, r: RawRecord, reference_text: str, v: Vocab,
                     opts: MatrixOptions = MatrixOptions(), max_len: Optional[int] = None) -> TrainingExample:
    target = tokenize(reference_text or "", v)
    if not target:
        raise ValueError("reference text tokenizes to nothing")
    lin = linearize(g, build_prefixes(r), v, max_len=max_len)
    buckets, mask = structure_matrices(lin, g, opts)
    return TrainingExample(lin, buckets, mask, target + [EOS], Objective.G2T)


# --------------------------------------------------------------------------
# synthetic corpus

ENTITIES = [
    "arthur hale", "berliner ak", "clara voss", "dorian frey", "elena marsh", "felix oduya",
    "greta lind", "hugo brandt", "ida kessler", "jonas weil", "karla benz", "leon armitage",
    "mira solberg", "nils okafor", "olga petrov", "paul dreyer", "quinn abara", "rosa lenk",
    "stefan udo", "tara quist", "ulrich moor", "vera nakamura", "walter extra", "xenia holt",
    "yusuf demir", "zora klein", "aldo ferri", "bea santos", "cyril mott", "dana ruiz",
    "emil strand", "fiona gale",
]
RELATIONS = {
    "club": "plays for", "birth place": "was born in", "spouse": "is married to",
    "mentor": "was trained by", "rival": "competes with", "employer": "works for",
    "sibling": "is a sibling of", "founder": "was founded by", "coach": "is coached by",
    "neighbor": "lives next to",
}
TABLE_COLUMNS = {
    "year": ["1457", "1458", "1976", "1982", "1990", "2004", "2011", "2019"],
    "team": ["red lions", "blue hawks", "iron wolves", "green bees", "night owls"],
    "city": ["leeds", "porto", "bergen", "lyon", "turin", "graz", "kyoto"],
    "score": ["12", "17", "23", "31", "40", "58"],
    "role": ["keeper", "striker", "captain", "reserve", "winger"],
}
KV_KEYS = {
    "nationality": ["german", "french", "polish", "danish", "irish", "greek"],
    "occupation": ["pilot", "painter", "engineer", "chemist", "poet", "sailor"],
    "birth place": ["leeds", "porto", "bergen", "lyon", "turin", "graz"],
    "birth date": ["1901", "1923", "1947", "1958", "1966", "1979"],
    "instrument": ["cello", "oboe", "piano", "drums", "harp"],
}
CATEGORIES = ["athlete", "artist", "sportsteam", "person", "company"]


def _record_rng(seed: int, index: int) -> random.Random:
    state = np.random.SeedSequence([seed, index]).generate_state(2)
    return random.Random(int(state[0]) << 32 | int(state[1]))


def _kg_record(rng: random.Random, min_triples: int, max_triples: int):
    n = rng.randint(min_triples, max_triples)
    ents = rng.sample(ENTITIES, n + 1)
    rels = list(RELATIONS)
    triples = []
    placed = [ents[0]]
    for k in range(n):
        subj = rng.choice(placed)
        obj = ents[k + 1]
        triples.append((subj, rng.choice(rels), obj))
        placed.append(obj)
    ref = " ".join(f"{s} {RELATIONS[r]} {o} ." for s, r, o in triples)
    rec = RawRecord(KgRecord(tuple(triples), category=rng.choice(CATEGORIES)), DatasetKind.WEBNLG, ref)
    return rec, ref


def _table_record(rng: random.Random):
    cols = rng.sample(sorted(TABLE_COLUMNS), rng.randint(1, 2))
    n_rows = rng.randint(1, 3)
    names = rng.sample(ENTITIES, n_rows)
    header = ["name"] + cols
    rows = [header]
    for name in names:
        rows.append([name] + [rng.choice(TABLE_COLUMNS[c]) for c in cols])
    sents = []
    for row in rows[1:]:
        parts = " and ".join(f"{h} {val}" for h, val in zip(cols, row[1:]))
        sents.append(f"{row[0]} has {parts} .")
    ref = " ".join(sents)
    title = f"list of {rng.choice(['players', 'members', 'winners'])}"
    rec = RawRecord(TableRecord(tuple(tuple(r) for r in rows), page_title=title), DatasetKind.TOTTO, ref)
    return rec, ref


def _kv_record(rng: random.Random):
    keys = rng.sample(sorted(KV_KEYS), rng.randint(2, 3))
    name = rng.choice(ENTITIES)
    pairs = [("name", name)] + [(k, rng.choice(KV_KEYS[k])) for k in keys]
    ref = f"{name} : " + " , ".join(f"{k} is {val}" for k, val in pairs[1:]) + " ."
    rec = RawRecord(KvRecord(tuple(pairs), title=name), DatasetKind.WIKIBIO, ref)
    return rec, ref


def generate_synthetic_corpus(seed: int, size: int, kind_mix=(1.0, 1.0, 1.0),
                              min_triples: int = 1, max_triples: int = 3) -> list[tuple[RawRecord, str]]:
    """Deterministic templated records; every reference is a function of its record.

    KG records grow as trees (each new triple hangs off an already placed
    entity), so the order of nodes in the linearization alone does not say
    which entity a relation attaches to.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    w = np.asarray(kind_mix, dtype=float)
    if w.shape != (3,) or (w < 0).any() or w.sum() <= 0:
        raise ValueError("kind_mix must be three non-negative weights")
    cum = np.cumsum(w / w.sum())
    out = []
    for i in range(size):
        rng = _record_rng(seed, i)
        u = rng.random()
        kind = int(np.searchsorted(cum, u, side="right"))
        kind = min(kind, 2)
        if kind == 0:
            out.append(_kg_record(rng, min_triples, max_triples))
        elif kind == 1:
            out.append(_table_record(rng))
        else:
            out.append(_kv_record(rng))
    return out


def corpus_to_jsonl(corpus: Iterable[tuple[RawRecord, str]]) -> str:
    lines = [json.dumps({"record": record_to_dict(r), "reference": ref}, ensure_ascii=False, sort_keys=True)
             for r, ref in corpus]
    return "".join(line + "\n" for line in lines)


def corpus_from_jsonl(text: str) -> list[tuple[RawRecord, str]]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        out.append((record_from_dict(d["record"]), d["reference"]))
    return out
