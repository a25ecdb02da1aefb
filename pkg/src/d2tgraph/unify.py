"""Conversion of knowledge graphs, tables and key-value records to UnifiedGraph."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Optional, Union

from .graph import Node, NodeKind, UnifiedGraph


class RecordError(ValueError):
    """Raised for malformed raw records; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DatasetKind(str, Enum):
    TOTTO = "ToTTo"
    COSQL = "CoSQL"
    DART = "DART"
    WEBNLG = "WebNLG"
    WIKIBIO = "WikiBio"
    WIKITABLET = "WikiTableT"
    SYNTHETIC = "Synthetic"


_PAYLOAD_KINDS = {
    "kg": {DatasetKind.DART, DatasetKind.WEBNLG, DatasetKind.SYNTHETIC},
    "table": {DatasetKind.TOTTO, DatasetKind.COSQL, DatasetKind.SYNTHETIC},
    "kv": {DatasetKind.WIKIBIO, DatasetKind.WIKITABLET, DatasetKind.SYNTHETIC},
}


@dataclass(frozen=True)
class KgRecord:
    triples: tuple[tuple[str, str, str], ...]
    category: Optional[str] = None
    source: Optional[str] = None


@dataclass(frozen=True)
class TableRecord:
    cells: tuple[tuple[str, ...], ...]
    highlighted: Optional[tuple[tuple[int, int], ...]] = None
    page_title: Optional[str] = None
    section_title: Optional[str] = None
    sql: Optional[str] = None


@dataclass(frozen=True)
class KvRecord:
    pairs: tuple[tuple[str, str], ...]
    title: Optional[str] = None
    section_title: Optional[str] = None


Payload = Union[KgRecord, TableRecord, KvRecord]


@dataclass(frozen=True)
class RawRecord:
    payload: Payload
    dataset_kind: DatasetKind = DatasetKind.SYNTHETIC
    reference_text: Optional[str] = None

    @property
    def kind(self) -> str:
        return payload_kind(self.payload)


def payload_kind(p: Payload) -> str:
    if isinstance(p, KgRecord):
        return "kg"
    if isinstance(p, TableRecord):
        return "table"
    if isinstance(p, KvRecord):
        return "kv"
    raise TypeError(f"unknown payload type {type(p).__name__}")


# --------------------------------------------------------------------------
# converters


def kg_to_graph(r: KgRecord, directed_only: bool = False, merge_relations: bool = False) -> UnifiedGraph:
    """Levi transform: every relation occurrence becomes a node between its endpoints.

    Entities are merged by exact string; relation nodes are one per triple
    unless ``merge_relations`` is set.
    """
    nodes: list[Node] = []
    entity_ids: dict[str, int] = {}
    relation_ids: dict[str, int] = {}
    edges: set[tuple[int, int]] = set()

    def entity(text):
        if text not in entity_ids:
            entity_ids[text] = len(nodes)
            nodes.append(Node(len(nodes), text, NodeKind.ENTITY))
        return entity_ids[text]

    def relation(text):
        if merge_relations and text in relation_ids:
            return relation_ids[text]
        relation_ids[text] = len(nodes)
        nodes.append(Node(len(nodes), text, NodeKind.RELATION))
        return relation_ids[text]

    for k, triple in enumerate(r.triples):
        if len(triple) != 3 or any(not str(x).strip() for x in triple):
            raise RecordError(f"triples[{k}]", "malformed triple")
        s, rel, o = triple
        si = entity(s)
        ri = relation(rel)
        oi = entity(o)
        edges.add((si, ri))
        edges.add((ri, oi))
        if not directed_only:
            edges.add((ri, si))
            edges.add((oi, ri))
    return UnifiedGraph(tuple(nodes), frozenset(edges), directed_only)


def table_to_graph(r: TableRecord) -> UnifiedGraph:
    if r.highlighted is not None:
        coords = sorted(set(r.highlighted))
    else:
        coords = [(i, j) for i, row in enumerate(r.cells) for j in range(len(row))]
    coords = [(i, j) for i, j in coords if r.cells[i][j].strip()]
    if not coords:
        raise RecordError("cells", "empty table")
    nodes = tuple(Node(k, r.cells[i][j], NodeKind.CELL) for k, (i, j) in enumerate(coords))
    edges: set[tuple[int, int]] = set()
    for (a, (ia, ja)), (b, (ib, jb)) in combinations(enumerate(coords), 2):
        if ia == ib or ja == jb:
            edges.add((a, b))
            edges.add((b, a))
    return UnifiedGraph(nodes, frozenset(edges), False)


def kv_to_graph(r: KvRecord) -> UnifiedGraph:
    nodes: list[Node] = []
    for k, (key, value) in enumerate(r.pairs):
        if not key.strip() or not value.strip():
            raise RecordError(f"pairs[{k}]", "malformed pair")
        nodes.append(Node(2 * k, key, NodeKind.KEY))
        nodes.append(Node(2 * k + 1, value, NodeKind.VALUE))
    p = len(r.pairs)
    edges: set[tuple[int, int]] = set()
    for k in range(p):
        edges |= {(2 * k, 2 * k + 1), (2 * k + 1, 2 * k)}
    for a, b in combinations(range(p), 2):
        for off in (0, 1):  # key-key, value-value
            edges |= {(2 * a + off, 2 * b + off), (2 * b + off, 2 * a + off)}
    return UnifiedGraph(tuple(nodes), frozenset(edges), False)


def record_to_graph(rec: RawRecord, directed_only: bool = False) -> UnifiedGraph:
    p = rec.payload
    if isinstance(p, KgRecord):
        return kg_to_graph(p, directed_only=directed_only)
    if isinstance(p, TableRecord):
        g = table_to_graph(p)
    else:
        g = kv_to_graph(p)
    if directed_only:
        # tables and kv records have no original direction; keep one order per pair
        return UnifiedGraph(g.nodes, frozenset((a, b) for a, b in g.edges if a < b), True)
    return g


# --------------------------------------------------------------------------
# JSON parsing


def _opt_str(d: dict, key: str, path: str) -> Optional[str]:
    v = d.get(key)
    if v is not None and not isinstance(v, str):
        raise RecordError(f"{path}{key}", "expected string")
    return v


def _str_list(v, path: str, length: Optional[int] = None) -> tuple[str, ...]:
    if not isinstance(v, list) or (length is not None and len(v) != length):
        n = f" of length {length}" if length is not None else ""
        raise RecordError(path, f"expected list{n}")
    for k, x in enumerate(v):
        if not isinstance(x, str):
            raise RecordError(f"{path}[{k}]", "expected string")
    return tuple(v)


def record_from_dict(d: dict) -> RawRecord:
    if not isinstance(d, dict):
        raise RecordError("$", "expected object")
    kind = d.get("kind")
    if kind not in _PAYLOAD_KINDS:
        raise RecordError("kind", f"expected one of kg/table/kv, got {kind!r}")
    try:
        dataset = DatasetKind(d.get("dataset_kind", "Synthetic"))
    except ValueError:
        raise RecordError("dataset_kind", f"unknown dataset kind {d.get('dataset_kind')!r}") from None
    if dataset not in _PAYLOAD_KINDS[kind]:
        raise RecordError("dataset_kind", f"{dataset.value} is incompatible with kind {kind}")
    ref = _opt_str(d, "reference_text", "")

    if kind == "kg":
        triples = d.get("triples")
        if not isinstance(triples, list):
            raise RecordError("triples", "expected list")
        if not triples:
            raise RecordError("triples", "empty")
        ts = []
        for k, t in enumerate(triples):
            t = _str_list(t, f"triples[{k}]", 3)
            for c, x in enumerate(t):
                if not x.strip():
                    raise RecordError(f"triples[{k}][{c}]", "empty string")
            ts.append(t)
        payload: Payload = KgRecord(tuple(ts), _opt_str(d, "category", ""), _opt_str(d, "source", ""))
    elif kind == "table":
        cells = d.get("cells")
        if not isinstance(cells, list) or not cells:
            raise RecordError("cells", "empty" if cells == [] else "expected list")
        rows = [_str_list(row, f"cells[{k}]") for k, row in enumerate(cells)]
        width = len(rows[0])
        if width == 0:
            raise RecordError("cells[0]", "empty")
        for k, row in enumerate(rows):
            if len(row) != width:
                raise RecordError(f"cells[{k}]", f"row length {len(row)} != {width} (grid not rectangular)")
        hl = d.get("highlighted")
        highlighted = None
        if hl is not None:
            if not isinstance(hl, list):
                raise RecordError("highlighted", "expected list")
            out = []
            for k, c in enumerate(hl):
                if (not isinstance(c, list) or len(c) != 2
                        or not all(isinstance(x, int) and not isinstance(x, bool) for x in c)):
                    raise RecordError(f"highlighted[{k}]", "expected [row, col]")
                i, j = c
                if not (0 <= i < len(rows) and 0 <= j < width):
                    raise RecordError(f"highlighted[{k}]", "coordinate out of range")
                out.append((i, j))
            highlighted = tuple(out)
        payload = TableRecord(
            tuple(rows), highlighted,
            _opt_str(d, "page_title", ""), _opt_str(d, "section_title", ""), _opt_str(d, "sql", ""),
        )
    else:
        pairs = d.get("pairs")
        if not isinstance(pairs, list):
            raise RecordError("pairs", "expected list")
        if not pairs:
            raise RecordError("pairs", "empty")
        ps = []
        for k, p in enumerate(pairs):
            p = _str_list(p, f"pairs[{k}]", 2)
            for c, x in enumerate(p):
                if not x.strip():
                    raise RecordError(f"pairs[{k}][{c}]", "empty string")
            ps.append(p)
        payload = KvRecord(tuple(ps), _opt_str(d, "title", ""), _opt_str(d, "section_title", ""))
    return RawRecord(payload, dataset, ref)


def parse_raw_record(data: bytes | str) -> RawRecord:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        d = json.loads(data)
    except json.JSONDecodeError as e:
        raise RecordError("$", f"invalid JSON ({e.msg})") from None
    return record_from_dict(d)


def record_to_dict(rec: RawRecord) -> dict:
    p = rec.payload
    d: dict = {"kind": rec.kind, "dataset_kind": rec.dataset_kind.value}
    if isinstance(p, KgRecord):
        d["triples"] = [list(t) for t in p.triples]
        opt = {"category": p.category, "source": p.source}
    elif isinstance(p, TableRecord):
        d["cells"] = [list(row) for row in p.cells]
        if p.highlighted is not None:
            d["highlighted"] = [list(c) for c in p.highlighted]
        opt = {"page_title": p.page_title, "section_title": p.section_title, "sql": p.sql}
    else:
        d["pairs"] = [list(kv) for kv in p.pairs]
        opt = {"title": p.title, "section_title": p.section_title}
    d.update({k: v for k, v in opt.items() if v is not None})
    if rec.reference_text is not None:
        d["reference_text"] = rec.reference_text
    return d


def serialize_raw_record(rec: RawRecord) -> str:
    return json.dumps(record_to_dict(rec), ensure_ascii=False, sort_keys=True)
