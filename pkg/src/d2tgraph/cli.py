"""Command-line entry point: ``d2tgraph <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .graph import UnifiedGraph
from .linearize import Vocab, build_prefixes, build_vocab, linearize
from .matrices import MatrixError, build_attention_matrix, build_position_matrix, dump_matrices
from .objectives import corpus_to_jsonl, generate_synthetic_corpus
from .unify import RecordError, parse_raw_record, record_from_dict, record_to_graph

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read_lines(path):
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    return [ln for ln in text.splitlines() if ln.strip()]


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _records(path):
    """Raw records from JSONL; corpus lines ``{"record": ..., "reference": ...}`` also accepted."""
    out = []
    for k, line in enumerate(_read_lines(path), 1):
        try:
            d = json.loads(line)
            if isinstance(d, dict) and "record" in d:
                rec = record_from_dict(d["record"])
            else:
                rec = parse_raw_record(line)
        except (RecordError, json.JSONDecodeError) as e:
            raise DataError(f"line {k}: {e}") from None
        out.append(rec)
    return out


def cmd_convert(a):
    recs = _records(a.input)
    lines = [record_to_graph(r, directed_only=a.directed_only).to_json() for r in recs]
    _write(a.output, "".join(ln + "\n" for ln in lines))


def cmd_vocab(a):
    from .training import load_corpus
    corpus = load_corpus(a.corpus)
    v = build_vocab([r for r, _ in corpus], [ref for _, ref in corpus], a.max_size)
    v.save(a.output)


def cmd_matrices(a):
    vocab = Vocab.load(a.vocab)
    graphs = [UnifiedGraph.from_json(ln) for ln in _read_lines(a.graphs)]
    prefixes = [("describe the following data:", "")] * len(graphs)
    if a.records:
        recs = _records(a.records)
        if len(recs) != len(graphs):
            raise DataError("records and graphs differ in length")
        prefixes = [build_prefixes(r) for r in recs]
    chunks = []
    for g, pre in zip(graphs, prefixes):
        lin = linearize(g, pre, vocab)
        chunks.append(dump_matrices(build_position_matrix(lin, g, gap_collapse=not a.raw_offsets),
                                    build_attention_matrix(lin, g)))
    _write(a.output, "".join(chunks))


def cmd_synth(a):
    mix = tuple(float(x) for x in a.kind_mix.split(","))
    corpus = generate_synthetic_corpus(a.seed, a.size, mix, a.min_triples, a.max_triples)
    _write(a.output, corpus_to_jsonl(corpus))


def cmd_train(a):
    from .training import RunConfig, train
    cfg = RunConfig.load(a.config) if a.config else RunConfig()
    cfg = cfg.with_overrides(train_path=a.train, dev_path=a.dev, out_dir=a.out_dir, max_steps=a.max_steps,
                             lr=a.lr, seed=a.seed, batch_size=a.batch_size, eval_every=a.eval_every,
                             patience_steps=a.patience_steps, vocab_path=a.vocab)
    if a.no_structure:
        cfg.structure = False
    if not cfg.train_path:
        raise DataError("no training corpus given (train_path / --train)")
    ckpt, history = train(cfg, progress=True)
    best = max(history, key=lambda r: r.dev_bleu) if history else None
    print(json.dumps({"checkpoint": str(ckpt), "evals": len(history),
                      "best_dev_bleu": best.dev_bleu if best else None}))


def cmd_generate(a):
    from .training import LoadedRun
    run = LoadedRun.from_dir(a.run_dir, a.checkpoint)
    recs = _records(a.input)
    _write(a.output, "".join(h + "\n" for h in run.generate_many(recs)))


def cmd_eval(a):
    from .training import evaluate_run, load_corpus
    res = evaluate_run(a.run_dir, load_corpus(a.corpus), a.checkpoint)
    print(json.dumps({k: res[k] for k in ("bleu", "loss", "token_acc")}))


def cmd_gradcheck(a):
    from .gradcheck import run_gradcheck
    res = run_gradcheck(seed=a.seed, tol=a.tol)
    for name, err in res.per_tensor.items():
        print(f"{name:24s} {err:.3e}")
    print(f"max relative error {res.max_error:.3e} (tolerance {a.tol:g}) -> {'PASS' if res.passed else 'FAIL'}")
    return EXIT_OK if res.passed else EXIT_DATA


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="d2tgraph", description=__doc__)
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    s = sub.add_parser("convert", help="raw record JSONL -> UnifiedGraph JSONL")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--directed-only", action="store_true")
    s.set_defaults(fn=cmd_convert)

    s = sub.add_parser("vocab", help="corpus JSONL -> vocab file")
    s.add_argument("corpus")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--max-size", type=int, default=10_000)
    s.set_defaults(fn=cmd_vocab)

    s = sub.add_parser("matrices", help="graph JSONL + vocab -> position/attention matrix dumps")
    s.add_argument("graphs")
    s.add_argument("--vocab", required=True)
    s.add_argument("--records", help="raw records aligned with the graphs, for prefixes")
    s.add_argument("--raw-offsets", action="store_true", help="use raw sequence offsets across spans")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_matrices)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--kind-mix", default="1,1,1", help="weights for kg,table,kv")
    s.add_argument("--min-triples", type=int, default=1)
    s.add_argument("--max-triples", type=int, default=3)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("train", help="train from a RunConfig JSON")
    s.add_argument("--config")
    s.add_argument("--train")
    s.add_argument("--dev")
    s.add_argument("--vocab")
    s.add_argument("--out-dir")
    s.add_argument("--max-steps", type=int)
    s.add_argument("--patience-steps", type=int)
    s.add_argument("--eval-every", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-structure", action="store_true", help="neutral matrices (linearized baseline)")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("generate", help="greedy generation for raw records")
    s.add_argument("run_dir")
    s.add_argument("input")
    s.add_argument("--checkpoint")
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_generate)

    s = sub.add_parser("eval", help="BLEU of a trained run on a corpus")
    s.add_argument("run_dir")
    s.add_argument("corpus")
    s.add_argument("--checkpoint")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    if not getattr(a, "fn", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        rc = a.fn(a)
    except (DataError, RecordError, MatrixError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if rc is None else rc


if __name__ == "__main__":
    sys.exit(main())
