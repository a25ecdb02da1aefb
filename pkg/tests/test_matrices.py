import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2tgraph.graph import Node, UnifiedGraph, build_graph
from d2tgraph.linearize import Vocab, build_prefixes, build_vocab, linearize, SPECIAL_TOKENS
from d2tgraph.matrices import (INF_NEG, INF_POS, NEG_BLOCK, MatrixError, bucket_positions,
                               build_attention_matrix, build_position_matrix, causal_buckets,
                               dump_matrices, parse_matrix_dump, to_additive_mask)
from d2tgraph.model import softmax
from d2tgraph.unify import DatasetKind, KgRecord, RawRecord, record_to_graph
from oracles import brute_force_matrices
from strategies import raw_records


@pytest.fixture(scope="module")
def jh():
    rec = RawRecord(KgRecord((("Jens Hartel", "club", "Berliner AK 07"),), category="SportsTeam"), DatasetKind.DART)
    g = record_to_graph(rec)
    v = build_vocab([rec])
    lin = linearize(g, build_prefixes(rec), v)
    toks = [v.tokens[i] for i in lin.token_ids]
    return g, lin, toks.index, build_position_matrix(lin, g), build_attention_matrix(lin, g)


def test_jens_hartel_position_values(jh):
    _, _, at, P, _ = jh
    assert P[at("jens"), at("club")] == 3
    assert P[at("jens"), at("berliner")] == INF_POS
    assert P[at("berliner"), at("jens")] == INF_NEG


def test_jens_hartel_attention_values(jh):
    _, _, at, _, A = jh
    assert A[at("jens"), at("club")] == 1
    assert A[at("hartel"), at("club")] == 1
    assert A[at("jens"), at("berliner")] == 0
    assert A[at("jens"), at("ak")] == 0


def test_jens_hartel_golden_dump(jh, golden):
    _, _, _, P, A = jh
    assert dump_matrices(P, A) == (golden / "jens_hartel_matrices.txt").read_text(encoding="utf-8")


def test_single_node_all_ones():
    g = UnifiedGraph((Node(0, "x", "Entity"),))
    v = Vocab(SPECIAL_TOKENS + ["x", "describe"])
    lin = linearize(g, ("describe", ""), v)
    assert build_attention_matrix(lin, g).all()


def test_gap_collapse_between_distant_nodes():
    # nodes 0 and 2 are connected, node 1 sits between them in the sequence
    g = build_graph([("a b", "Entity"), ("c", "Entity"), ("d", "Entity")], {(0, 2), (2, 0)})
    v = Vocab(SPECIAL_TOKENS + list("abcdp"))
    lin = linearize(g, ("p", ""), v)
    # tokens: [P] p | [N] a b | [N] c | [N] d
    P = build_position_matrix(lin, g)
    assert P[3, 8] == 3           # 'a' -> 'd': b, [N], d once c's span is skipped
    assert P[8, 3] == -3
    assert build_position_matrix(lin, g, gap_collapse=False)[3, 8] == 5
    assert P[3, 6] == INF_POS     # a and c are not connected


def test_mismatched_linearization():
    g = build_graph([("a", "Entity"), ("b", "Entity")], {(0, 1), (1, 0)})
    v = Vocab(SPECIAL_TOKENS + ["a", "b"])
    lin = linearize(build_graph([("a", "Entity")], set()), ("a", ""), v)
    with pytest.raises(MatrixError, match="linearization does not match graph"):
        build_attention_matrix(lin, g)
    with pytest.raises(MatrixError):
        build_position_matrix(lin, g)


def _build(rec):
    g = record_to_graph(rec)
    v = build_vocab([rec])
    lin = linearize(g, build_prefixes(rec), v)
    return g, lin


@given(raw_records())
def test_matches_brute_force(rec):
    g, lin = _build(rec)
    for gap in (True, False):
        D, A = brute_force_matrices(lin, g, gap_collapse=gap)
        assert (build_position_matrix(lin, g, gap_collapse=gap) == np.array(D)).all()
        assert (build_attention_matrix(lin, g) == np.array(A)).all()


@given(raw_records())
def test_matrix_invariants(rec):
    g, lin = _build(rec)
    P = build_position_matrix(lin, g).astype(np.int64)
    A = build_attention_matrix(lin, g)
    sentinel = (P == INF_POS) | (P == INF_NEG)
    assert (A == A.T).all()
    assert (np.diag(A) == 1).all() and (np.diag(P) == 0).all()
    assert ((A == 0) == sentinel).all()
    assert (P[~sentinel] == -P.T[~sentinel]).all()
    assert ((P == INF_POS) == (P.T == INF_NEG)).all()
    for s, e in lin.prefix_spans:
        assert A[s:e].all() and A[:, s:e].all()
        assert not sentinel[s:e].any()


@given(raw_records(), st.randoms(use_true_random=False))
def test_attention_permutation_equivariance(rec, rnd):
    g, lin = _build(rec)
    v = build_vocab([rec])
    perm = list(range(len(g.nodes)))
    rnd.shuffle(perm)
    inv = {old: new for new, old in enumerate(perm)}
    g2 = UnifiedGraph(tuple(Node(k, g.nodes[perm[k]].text, g.nodes[perm[k]].kind) for k in range(len(perm))),
                      frozenset((inv[a], inv[b]) for a, b in g.edges))
    lin2 = linearize(g2, build_prefixes(rec), v)
    # token index in lin2 for every token of lin
    tok_map = list(range(lin.node_spans[0][0])) if lin.node_spans else []
    pos_of = {}
    for old, (s, e) in enumerate(lin.node_spans):
        s2 = lin2.node_spans[inv[old]][0]
        for t in range(s, e):
            pos_of[t] = s2 + (t - s)
    tok_map += [pos_of[t] for t in range(len(tok_map), len(lin))]
    A, A2 = build_attention_matrix(lin, g), build_attention_matrix(lin2, g2)
    idx = np.array(tok_map)
    assert (A2[np.ix_(idx, idx)] == A).all()


def test_directed_only_attention_follows_edges():
    rec = RawRecord(KgRecord((("s", "r", "o"),)))
    g = record_to_graph(rec, directed_only=True)
    v = build_vocab([rec])
    lin = linearize(g, ("", ""), v)
    A = build_attention_matrix(lin, g)
    s, r, o = (lin.node_spans[k][0] + 1 for k in range(3))
    assert A[s, r] == 1 and A[r, s] == 0 and A[r, o] == 1 and A[o, r] == 0


# ---------------------------------------------------------------- buckets


def test_buckets_match_golden(golden):
    rows = [ln.split() for ln in (golden / "buckets_32_128.txt").read_text().splitlines()]
    conv = {"+INF": INF_POS, "-INF": INF_NEG}
    d = np.array([conv.get(a, None) if a in conv else int(a) for a, _ in rows], dtype=np.int64)
    expected = np.array([int(b) for _, b in rows])
    assert (bucket_positions(d) == expected).all()


def test_bucket_zero_and_sentinels():
    b = bucket_positions(np.array([[0, INF_POS], [INF_NEG, 0]], dtype=np.int32))
    assert b.tolist() == [[16, 0], [0, 16]]


def test_bucket_signs_distinct_and_in_range():
    d = np.arange(1, 128)
    pos, neg = bucket_positions(d), bucket_positions(-d)
    assert (pos != neg).all()
    assert ((pos >= 16) & (pos < 32)).all() and ((neg >= 1) & (neg < 16)).all()
    assert bucket_positions(np.array([500, -500])).tolist() == [31, 15]


def test_bucket_argument_checks():
    with pytest.raises(ValueError):
        bucket_positions(np.zeros((1, 1), dtype=np.int32), num_buckets=7)


def test_causal_buckets():
    cb = causal_buckets(4, 32, 128)
    assert cb[3, 0] == 3 and cb[0, 0] == 0 and cb[0, 3] == 0


# ---------------------------------------------------------------- additive mask


def test_additive_mask_examples():
    assert to_additive_mask(np.array([[1, 0], [0, 1]])).tolist() == [[0.0, NEG_BLOCK], [NEG_BLOCK, 0.0]]
    assert (to_additive_mask(np.ones((3, 3))) == 0).all()
    with pytest.raises(MatrixError, match="fully masked row"):
        to_additive_mask(np.array([[0, 0], [0, 1]]))


def _softmax_ref(row, keep):
    vals = [x for x, k in zip(row, keep) if k]
    mx = max(vals)
    z = sum(np.exp(x - mx) for x in vals)
    it = iter(np.exp(x - mx) / z for x in vals)
    return [next(it) if k else 0.0 for k in keep]


@given(st.integers(2, 12), st.integers(0, 10_000))
def test_masked_softmax_equals_softmax_over_unblocked(m, seed):
    rng = np.random.default_rng(seed)
    a = (rng.random((m, m)) < 0.5).astype(np.uint8)
    np.fill_diagonal(a, 1)
    logits = rng.normal(0, 30, (m, m))
    p = softmax(logits + to_additive_mask(a))
    for i in range(m):
        assert np.abs(p[i] - np.array(_softmax_ref(logits[i], a[i]))).max() <= 1e-12
        assert abs(p[i].sum() - 1) <= 1e-12
        assert (p[i][a[i] == 0] < 1e-300).all()


def test_dump_round_trip(jh):
    _, _, _, P, A = jh
    P2, A2 = parse_matrix_dump(dump_matrices(P, A))
    assert (P2 == P).all() and (A2 == A).all()
