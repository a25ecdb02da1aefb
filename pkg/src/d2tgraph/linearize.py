"""Prefixes, word-level vocabulary and graph linearization with marker tokens."""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .graph import UnifiedGraph
from .unify import DatasetKind, KgRecord, KvRecord, RawRecord, TableRecord, record_to_graph

PAD, EOS, UNK, PREFIX_MARK, NODE_MARK = 0, 1, 2, 3, 4
SENTINEL_BASE = 5
NUM_SENTINELS = 100
NUM_SPECIALS = SENTINEL_BASE + NUM_SENTINELS  # 105

SPECIAL_TOKENS = ["<pad>", "</s>", "<unk>", "[Prefix]", "[Node]"] + [
    f"<extra_id_{k}>" for k in range(NUM_SENTINELS)
]

PREFIX_I = "describe the following data:"

_TOKEN_RE = re.compile(r"<extra_id_\d+>|\[Prefix\]|\[Node\]|\w+|[^\w\s]", re.UNICODE)


def sentinel_id(k: int) -> int:
    if not 0 <= k < NUM_SENTINELS:
        raise ValueError(f"sentinel index {k} out of range")
    return SENTINEL_BASE + k


def is_sentinel(tok_id: int) -> bool:
    return SENTINEL_BASE <= tok_id < NUM_SPECIALS


def split_words(text: str) -> list[str]:
    """Lowercased word/punctuation split; marker and sentinel strings stay whole."""
    out = []
    for tok in _TOKEN_RE.findall(text):
        out.append(tok if tok in _SPECIAL_SET else tok.lower())
    return out


_SPECIAL_SET = frozenset(SPECIAL_TOKENS)


class Vocab:
    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tokens[:NUM_SPECIALS] != SPECIAL_TOKENS:
            raise ValueError("vocab must start with the 105 reserved special tokens")
        index = {}
        for i, t in enumerate(tokens):
            if t in index:
                raise ValueError(f"duplicate vocab token {t!r}")
            index[t] = i
        self.tokens = tokens
        self._index = index

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, tok):
        return tok in self._index

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def id(self, tok: str) -> int:
        return self._index.get(tok, UNK)

    def decode(self, ids: Iterable[int], skip_special: bool = True) -> str:
        words = []
        for i in ids:
            i = int(i)
            if i == EOS and skip_special:
                break
            if skip_special and i in (PAD, PREFIX_MARK, NODE_MARK):
                continue
            words.append(self.tokens[i] if 0 <= i < len(self.tokens) else "<unk>")
        return " ".join(words)

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path) -> Vocab:
        text = Path(path).read_text(encoding="utf-8")
        return cls(text.split("\n")[:-1] if text.endswith("\n") else text.split("\n"))


def tokenize(text: str, v: Vocab) -> list[int]:
    return [v.id(t) for t in split_words(text)]


def build_prefixes(r: RawRecord) -> tuple[str, str]:
    """Instruction prefix plus the dataset-specific metadata prefix.

    Template clauses whose metadata is missing are dropped.
    """
    p = r.payload
    kind = r.dataset_kind
    clauses: list[str] = []
    if kind is DatasetKind.TOTTO and isinstance(p, TableRecord):
        if p.page_title:
            clauses.append(f"The table page title is: {p.page_title}")
        if p.section_title:
            clauses.append(f"The table section title is: {p.section_title}")
    elif kind is DatasetKind.COSQL and isinstance(p, TableRecord):
        if p.sql:
            clauses.append(p.sql)
    elif kind is DatasetKind.DART and isinstance(p, KgRecord):
        if p.source:
            clauses.append(f"The source is: {p.source}")
        if p.category:
            clauses.append(f"The category of the DBpedia entities is : {p.category}.")
    elif kind is DatasetKind.WEBNLG and isinstance(p, KgRecord):
        if p.category:
            clauses.append(f"The category of the entities is: {p.category}")
        clauses.append(f"The number of RDF triples is: {len(p.triples)}")
    elif kind is DatasetKind.WIKIBIO and isinstance(p, KvRecord):
        if p.title:
            clauses.append(f"The article title is: {p.title}")
    elif kind is DatasetKind.WIKITABLET and isinstance(p, KvRecord):
        if p.title:
            clauses.append(f"the document title is: {p.title}")
        if p.section_title:
            clauses.append(f"the section title is: {p.section_title}")
    return PREFIX_I, ", ".join(clauses)


def build_vocab(records: Iterable[RawRecord], references: Iterable[str] = (), max_size: int = 10_000) -> Vocab:
    """Specials first, then corpus words by descending count, ties lexicographic."""
    if max_size <= NUM_SPECIALS:
        raise ValueError(f"max_size must exceed {NUM_SPECIALS}")
    counts: Counter = Counter()

    def add(text):
        counts.update(t for t in split_words(text) if t not in _SPECIAL_SET)

    for rec in records:
        for s in build_prefixes(rec):
            add(s)
        for node in record_to_graph(rec).nodes:
            add(node.text)
        if rec.reference_text:
            add(rec.reference_text)
    for ref in references:
        add(ref)
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocab(SPECIAL_TOKENS + ordered[: max_size - NUM_SPECIALS])


@dataclass(frozen=True)
class LinearizedInput:
    token_ids: tuple[int, ...]
    prefix_spans: tuple[tuple[int, int], ...]
    node_spans: tuple[tuple[int, int], ...]  # indexed by node id

    def __len__(self):
        return len(self.token_ids)

    def to_dict(self) -> dict:
        return {
            "token_ids": list(self.token_ids),
            "prefix_spans": [list(s) for s in self.prefix_spans],
            "node_spans": {str(k): list(s) for k, s in enumerate(self.node_spans)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> LinearizedInput:
        spans = sorted((int(k), tuple(v)) for k, v in d["node_spans"].items())
        if [k for k, _ in spans] != list(range(len(spans))):
            raise ValueError("node_spans keys must be dense node ids")
        return cls(
            tuple(d["token_ids"]),
            tuple(tuple(s) for s in d["prefix_spans"]),
            tuple(s for _, s in spans),
        )


def linearize(
    g: UnifiedGraph,
    prefixes: tuple[str, str],
    v: Vocab,
    replacements: Optional[Mapping[int, Sequence[int]]] = None,
    max_len: Optional[int] = None,
) -> LinearizedInput:
    """Flatten ``g`` as ``[Prefix] I [Prefix] S [Node] t0 [Node] t1 ...``.

    ``replacements`` maps node ids to token ids that stand in for the node text
    (used by the denoising objective). An empty Prefix-S drops its segment.
    """
    ids: list[int] = []
    prefix_spans = []
    for text in prefixes:
        if not text:
            continue
        start = len(ids)
        ids.append(PREFIX_MARK)
        ids.extend(tokenize(text, v))
        prefix_spans.append((start, len(ids)))
    node_spans = []
    replacements = replacements or {}
    for node in g.nodes:
        toks = list(replacements[node.id]) if node.id in replacements else tokenize(node.text, v)
        if not toks:
            raise ValueError(f"empty node text (node {node.id})")
        start = len(ids)
        ids.append(NODE_MARK)
        ids.extend(toks)
        node_spans.append((start, len(ids)))
    if max_len is not None and len(ids) > max_len:
        raise ValueError(f"linearized input of length {len(ids)} exceeds max_len={max_len}")
    return LinearizedInput(tuple(ids), tuple(prefix_spans), tuple(node_spans))


def linearize_record(rec: RawRecord, v: Vocab, directed_only: bool = False, max_len=None):
    g = record_to_graph(rec, directed_only=directed_only)
    return g, linearize(g, build_prefixes(rec), v, max_len=max_len)
