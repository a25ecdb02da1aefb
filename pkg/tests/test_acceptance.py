"""Acceptance gate: one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``. The two training
experiments at the end take most of the time (about 1-2 and 20-25 minutes
on one core).
"""
import random
import time

import numpy as np
import pytest

from d2tgraph import model as M
from d2tgraph.bleu import corpus_bleu
from d2tgraph.experiments import overfit_experiment, structure_ablation
from d2tgraph.gradcheck import run_gradcheck
from d2tgraph.linearize import build_prefixes, build_vocab, linearize
from d2tgraph.matrices import (INF_POS, NEG_BLOCK, bucket_positions, build_attention_matrix,
                               build_position_matrix, dump_matrices, to_additive_mask)
from d2tgraph.objectives import NoiseSpec, apply_struct_noise, mask_count, restore_noised
from d2tgraph.unify import DatasetKind, KgRecord, KvRecord, RawRecord, TableRecord, kg_to_graph, record_to_graph
from oracles import brute_force_matrices

WORDS = "red blue green old new north south river hill stone oak pine union city club".split()


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
        assert ok, f"criterion {n} failed: {detail}"
    return emit


def _phrase(rng):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3)))


def random_record(rng):
    """A record of any kind whose graph has at most 6 nodes."""
    kind = rng.randrange(3)
    if kind == 0:
        triples = tuple((_phrase(rng), _phrase(rng), _phrase(rng)) for _ in range(rng.randint(1, 2)))
        ds = rng.choice([DatasetKind.DART, DatasetKind.WEBNLG, DatasetKind.SYNTHETIC])
        return RawRecord(KgRecord(triples, category=rng.choice([None, "Food"])), ds)
    if kind == 1:
        n, m = rng.choice([(1, 1), (1, 3), (2, 2), (2, 3), (3, 2), (1, 6), (6, 1)])
        cells = tuple(tuple(_phrase(rng) for _ in range(m)) for _ in range(n))
        return RawRecord(TableRecord(cells, page_title=rng.choice([None, "list"])), DatasetKind.TOTTO)
    pairs = tuple((_phrase(rng), _phrase(rng)) for _ in range(rng.randint(1, 3)))
    return RawRecord(KvRecord(pairs, title="walter"), rng.choice([DatasetKind.WIKIBIO, DatasetKind.WIKITABLET]))


def _lin(rec, v=None, directed_only=False):
    g = record_to_graph(rec, directed_only=directed_only)
    v = v or build_vocab([rec])
    return g, linearize(g, build_prefixes(rec), v)


def test_criterion_1_matrix_oracle(report):
    rng = random.Random(2024)
    t0 = time.perf_counter()
    kinds, bad = set(), 0
    for k in range(500):
        rec = random_record(rng)
        kinds.add(rec.kind)
        g, lin = _lin(rec, directed_only=(k % 5 == 4))
        assert len(g.nodes) <= 6
        D, A = brute_force_matrices(lin, g)
        ok = (build_position_matrix(lin, g) == np.array(D)).all() and (build_attention_matrix(lin, g) == np.array(A)).all()
        bad += not ok
    dt = time.perf_counter() - t0
    report(1, "matrix oracle equivalence", bad == 0 and len(kinds) == 3 and dt < 10,
           f"(500 graphs, {bad} mismatches, {dt:.1f}s)")


def test_criterion_2_worked_examples(report, golden):
    rec = RawRecord(KgRecord((("Jens Hartel", "club", "Berliner AK 07"),), category="SportsTeam"), DatasetKind.DART)
    g = record_to_graph(rec)
    v = build_vocab([rec])
    lin = linearize(g, build_prefixes(rec), v)
    at = [v.tokens[i] for i in lin.token_ids].index
    P, A = build_position_matrix(lin, g), build_attention_matrix(lin, g)
    values = (P[at("jens"), at("club")] == 3 and P[at("jens"), at("berliner")] == INF_POS
              and A[at("jens"), at("club")] == 1 and A[at("jens"), at("berliner")] == 0)
    dump_ok = dump_matrices(P, A) == (golden / "jens_hartel_matrices.txt").read_text(encoding="utf-8")
    vocab_ok = "\n".join(v.tokens) + "\n" == (golden / "jens_hartel.vocab").read_text(encoding="utf-8")
    levi = kg_to_graph(KgRecord((("Dance of the Seven Veils", "GENRE", "incidental music"),)))
    levi_ok = (len(levi.nodes) == 3 and levi.sorted_edges() == [(0, 1), (1, 0), (1, 2), (2, 1)]
               and levi.to_json() + "\n" == (golden / "levi_dance_graph.json").read_text(encoding="utf-8"))
    report(2, "worked examples", values and dump_ok and vocab_ok and levi_ok,
           f"(values={values}, golden dump={dump_ok}, vocab={vocab_ok}, levi={levi_ok})")


def test_criterion_3_gradcheck(report):
    t0 = time.perf_counter()
    res = run_gradcheck(seed=0, tol=1e-4, step=1e-5)
    dt = time.perf_counter() - t0
    worst = max(res.per_tensor, key=res.per_tensor.get)
    report(3, "gradient check", res.passed and "enc.rel_bias" in res.per_tensor and dt < 120,
           f"(max rel err {res.max_error:.2e} at {worst}, {len(res.per_tensor)} tensors, {dt:.1f}s)")


def test_criterion_4_degenerate_reduction(report):
    rng = random.Random(4)
    cfg = M.ModelConfig(vocab_size=400, d_model=64, n_heads=4, d_ff=128, seed=4)
    params = M.init_params(cfg)
    worst = 0.0
    for _ in range(50):
        rec = random_record(rng)
        g, lin = _lin(rec)
        ids = np.minimum(np.array(lin.token_ids), cfg.vocab_size - 1)
        # real structural buckets, zero tables, all-ones attention
        buckets = bucket_positions(build_position_matrix(lin, g))
        mask = to_additive_mask(np.ones((len(lin), len(lin)), dtype=np.uint8))
        a = M.encode(params, cfg, ids, buckets, mask)
        b = M.encode(params, cfg, ids)
        worst = max(worst, float(np.abs(a - b).max()))
    report(4, "degenerate reduction", worst <= 1e-12, f"(max abs diff {worst:.1e} over 50 inputs)")


def test_criterion_5_masked_softmax(report):
    rng = random.Random(5)
    nrng = np.random.default_rng(5)
    cfg = M.ModelConfig(vocab_size=400, d_model=32, n_heads=2, d_ff=64, init_std=0.5, seed=5)
    params = M.init_params(cfg)
    params["enc.rel_bias"] = nrng.normal(0, 2.0, params["enc.rel_bias"].shape)
    worst = 0.0
    for _ in range(50):
        g, lin = _lin(random_record(rng))
        A = build_attention_matrix(lin, g)
        buckets = bucket_positions(build_position_matrix(lin, g))
        ids = np.minimum(np.array(lin.token_ids), cfg.vocab_size - 1)
        trace = {}
        M.encode_batch(params, cfg, ids[None], buckets[None], to_additive_mask(A)[None], trace=trace)
        _, (xq, xkv, wq, wk, wv, wo, q, k, v, p, *_rest) = trace["enc_layers"][0][:2]
        bias = params["enc.rel_bias"][buckets].transpose(2, 0, 1)
        for h in range(cfg.n_heads):
            s = q[0, h] @ k[0, h].T / np.sqrt(cfg.d_head) + bias[h]
            for i in range(len(lin)):
                keep = A[i] == 1
                e = np.exp(s[i][keep] - s[i][keep].max())
                ref = np.zeros(len(lin))
                ref[keep] = e / e.sum()
                worst = max(worst, float(np.abs(p[0, h, i] - ref).max()))
    blocked = M.softmax(np.array([0.0, 3.0]) + np.array([0.0, NEG_BLOCK]))
    report(5, "masked softmax equivalence", worst <= 1e-12 and blocked[1] == 0.0,
           f"(max abs diff {worst:.1e})")


def test_criterion_8_denoise_round_trip(report):
    rng = random.Random(8)
    failures = 0
    for k in range(200):
        rec = random_record(rng)
        g, clean = _lin(rec)
        v = build_vocab([rec])
        ex = apply_struct_noise(g, rec, NoiseSpec(0.15, k), v)
        ok = (restore_noised(ex.input, ex.target_ids) == list(clean.token_ids)
              and len(ex.masked_nodes) == mask_count(len(g.nodes), 0.15) == -(-15 * len(g.nodes) // 100))
        failures += not ok
    report(8, "denoising round trip", failures == 0, f"(200 graphs, {failures} failures)")


def test_criterion_9_bleu(report):
    refs = ["jens hartel plays for berliner ak 07 .", "walter extra is german ."]
    identity = corpus_bleu(refs, refs)
    clipped = corpus_bleu(["the the the the"], ["the cat"])
    repeat = len({corpus_bleu(["a b c d e"], ["a b c d f"]) for _ in range(5)}) == 1
    report(9, "BLEU correctness", identity == 1.0 and clipped == 0.0 and repeat,
           f"(identity={identity}, clipped={clipped}, deterministic={repeat})")


def test_criterion_6_overfit(report):
    res = overfit_experiment(seed=7, size=64, max_steps=2000)
    ok = res.token_acc >= 0.99 and res.bleu >= 0.95 and res.seconds < 15 * 60
    report(6, "overfit 64 synthetic examples", ok,
           f"(token acc {res.token_acc:.4f}, BLEU {res.bleu:.4f}, best step {res.best_step}, {res.seconds:.0f}s)")


def test_criterion_7_structure_benefit(report):
    runs = structure_ablation(range(5))
    wins = sum(r.structure_wins for r in runs)
    detail = ", ".join(f"s{r.seed} {r.structure_bleu:.3f}/{r.baseline_bleu:.3f}" for r in runs)
    report(7, "structure beats linearized baseline", wins >= 4, f"({wins}/5 seeds; structure/baseline {detail})")
