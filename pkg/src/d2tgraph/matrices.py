"""Structure-aware attention and relative-position matrices over a linearized graph.

Token ownership drives everything: each token belongs either to a prefix
segment (globally connected) or to exactly one node span. Two node tokens
may attend to each other iff they share a span or their nodes share an edge.
"""
from __future__ import annotations

import math

import numpy as np

from .graph import UnifiedGraph
from .linearize import LinearizedInput

INF_POS = np.iinfo(np.int32).max
INF_NEG = np.iinfo(np.int32).min
NEG_BLOCK = -1e9

PREFIX_OWNER = -1


class MatrixError(ValueError):
    pass


def token_owners(lin: LinearizedInput, g: UnifiedGraph) -> np.ndarray:
    """Owner node id per token, ``PREFIX_OWNER`` for prefix tokens."""
    m = len(lin)
    if len(lin.node_spans) != len(g.nodes):
        raise MatrixError("linearization does not match graph")
    owner = np.full(m, -2, dtype=np.int64)
    for s, e in lin.prefix_spans:
        owner[s:e] = PREFIX_OWNER
    for k, (s, e) in enumerate(lin.node_spans):
        if s >= e or e > m:
            raise MatrixError("linearization does not match graph")
        owner[s:e] = k
    if (owner == -2).any():
        raise MatrixError("linearization does not match graph")
    return owner


def _connectivity(lin: LinearizedInput, g: UnifiedGraph):
    owner = token_owners(lin, g)
    n = len(g.nodes)
    adj = np.eye(n, dtype=bool)
    for a, b in g.edges:
        adj[a, b] = True
    is_prefix = owner == PREFIX_OWNER
    o = np.where(is_prefix, 0, owner)
    A = adj[o[:, None], o[None, :]]
    A |= is_prefix[:, None] | is_prefix[None, :]
    return owner, is_prefix, A


def build_attention_matrix(lin: LinearizedInput, g: UnifiedGraph) -> np.ndarray:
    """Binary m x m matrix (uint8), 1 where token i may attend to token j."""
    _, _, A = _connectivity(lin, g)
    return A.astype(np.uint8)


def build_position_matrix(lin: LinearizedInput, g: UnifiedGraph, gap_collapse: bool = True) -> np.ndarray:
    """Graph-aware relative distances (int32) with INF_POS/INF_NEG for blocked pairs.

    Cross-span distances between connected nodes are taken as if the two
    spans were adjacent in their original order. With ``gap_collapse=False``
    the raw sequence offset ``j - i`` is used instead.
    """
    owner, is_prefix, A = _connectivity(lin, g)
    m = len(owner)
    idx = np.arange(m, dtype=np.int64)
    raw = idx[None, :] - idx[:, None]
    d = raw.copy()
    if gap_collapse and m:
        starts = np.zeros(m, dtype=np.int64)
        lens = np.ones(m, dtype=np.int64)
        node_tok = ~is_prefix
        spans = np.asarray(lin.node_spans, dtype=np.int64).reshape(-1, 2)
        starts[node_tok] = spans[owner[node_tok], 0]
        lens[node_tok] = spans[owner[node_tok], 1] - spans[owner[node_tok], 0]
        off = idx - starts
        row_first = starts[:, None] < starts[None, :]
        row_later = starts[:, None] > starts[None, :]
        # i's span precedes j's: (tokens left in i's span) + offset of j
        fwd = lens[:, None] - off[:, None] + off[None, :]
        # i's span follows j's: mirror of the above
        bwd = -(lens[None, :] - off[None, :] + off[:, None])
        cross = ~(is_prefix[:, None] | is_prefix[None, :]) & (owner[:, None] != owner[None, :])
        d = np.where(cross & row_first, fwd, d)
        d = np.where(cross & row_later, bwd, d)
    d = np.where(A, d, np.where(raw > 0, INF_POS, INF_NEG))
    return d.astype(np.int32)


def _bucket_one_side(n: np.ndarray, num_buckets: int, max_distance: int) -> np.ndarray:
    """Non-negative distance -> [0, num_buckets): exact below half, log above."""
    max_exact = num_buckets // 2
    n = np.asarray(n, dtype=np.int64)
    safe = np.maximum(n, 1).astype(np.float64)
    large = max_exact + (
        np.log(safe / max_exact) / math.log(max_distance / max_exact) * (num_buckets - max_exact)
    ).astype(np.int64)
    large = np.minimum(large, num_buckets - 1)
    out = np.where(n < max_exact, n, large)
    return np.where(n >= max_distance, num_buckets - 1, out)


def bucket_positions(p: np.ndarray, num_buckets: int = 32, max_distance: int = 128) -> np.ndarray:
    """Bidirectional bucketing of a position matrix.

    Non-negative distances use buckets ``[half, num_buckets)`` with ``d=0`` at
    ``half``; negative distances use ``[1, half)``. Bucket 0 is reserved for
    the INF sentinels, whose bias never matters because the pair is masked.
    """
    if num_buckets < 4 or num_buckets % 2:
        raise ValueError("num_buckets must be even and >= 4")
    half = num_buckets // 2
    p = np.asarray(p, dtype=np.int64)
    sentinel = (p == INF_POS) | (p == INF_NEG)
    d = np.where(sentinel, 0, p)
    pos = half + _bucket_one_side(np.maximum(d, 0), half, max_distance)
    neg = _bucket_one_side(np.maximum(-d, 0), half, max_distance)
    neg = np.maximum(neg, 1)
    b = np.where(d >= 0, pos, neg)
    return np.where(sentinel, 0, b).astype(np.int64)


def causal_buckets(n: int, num_buckets: int = 32, max_distance: int = 128) -> np.ndarray:
    """Unidirectional buckets for decoder self-attention, indexed by ``i - j``."""
    idx = np.arange(n)
    back = np.maximum(idx[:, None] - idx[None, :], 0)
    return _bucket_one_side(back, num_buckets, max_distance)


def to_additive_mask(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.size and (a.max(axis=-1) == 0).any():
        raise MatrixError("fully masked row")
    return np.where(a.astype(bool), 0.0, NEG_BLOCK)


def neutral_matrices(m: int):
    """All-ones attention and raw sequential offsets: the structure-free baseline."""
    idx = np.arange(m, dtype=np.int32)
    return (idx[None, :] - idx[:, None]).astype(np.int32), np.ones((m, m), dtype=np.uint8)


def dump_matrices(p: np.ndarray, a: np.ndarray) -> str:
    """Text dump: ``m=<m>``, the position rows, then the attention rows."""
    m = p.shape[0]
    lines = [f"m={m}"]
    for row in p:
        lines.append(" ".join("+INF" if x == INF_POS else "-INF" if x == INF_NEG else str(int(x)) for x in row))
    for row in a:
        lines.append(" ".join(str(int(x)) for x in row))
    return "\n".join(lines) + "\n"


def parse_matrix_dump(text: str):
    lines = text.rstrip("\n").split("\n")
    if not lines[0].startswith("m="):
        raise ValueError("missing m= header")
    m = int(lines[0][2:])
    conv = {"+INF": INF_POS, "-INF": INF_NEG}
    p = np.array([[conv.get(x, None) if x in conv else int(x) for x in ln.split()] for ln in lines[1:1 + m]],
                 dtype=np.int64).reshape(m, m).astype(np.int32)
    a = np.array([[int(x) for x in ln.split()] for ln in lines[1 + m:1 + 2 * m]], dtype=np.uint8).reshape(m, m)
    return p, a
