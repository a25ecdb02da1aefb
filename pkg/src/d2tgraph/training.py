"""Training loop with early stopping, greedy generation and evaluation."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import model as M
from .bleu import corpus_bleu
from .linearize import Vocab, build_vocab, split_words, PAD
from .objectives import (MatrixOptions, NoiseSpec, TrainingExample, apply_struct_noise,
                         corpus_from_jsonl, make_g2t_example, structure_matrices)
from .linearize import build_prefixes, linearize
from .unify import RawRecord, record_to_graph

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ModelSpec:
    """ModelConfig minus vocab_size, which comes from the vocabulary."""
    d_model: int = 64
    n_heads: int = 4
    d_ff: int = 128
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    num_buckets: int = 32
    max_distance: int = 128
    max_len: int = 160
    seed: int = 0
    init_std: float = 0.02
    strict_scaling: bool = False

    def build(self, vocab_size: int) -> M.ModelConfig:
        return M.ModelConfig(vocab_size=vocab_size, **asdict(self))


@dataclass
class RunConfig:
    train_path: str = ""
    dev_path: str = ""
    out_dir: str = "run"
    vocab_path: Optional[str] = None
    model: ModelSpec = field(default_factory=ModelSpec)
    denoise_prob: float = 0.5
    mask_rate: float = 0.15
    batch_size: int = 8
    max_steps: int = 5000
    patience_steps: int = 1000
    lr: float = 1e-3
    eval_every: int = 100
    seed: int = 0
    structure: bool = True
    gap_collapse: bool = True
    directed_only: bool = False
    max_vocab: int = 10_000
    max_decode_len: int = 80

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelSpec(**self.model)
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.patience_steps < 1:
            raise ValueError("patience_steps must be >= 1")
        if self.eval_every < 1 or self.batch_size < 1:
            raise ValueError("eval_every and batch_size must be >= 1")

    @property
    def matrix_options(self) -> MatrixOptions:
        return MatrixOptions(self.structure, self.gap_collapse, self.model.num_buckets, self.model.max_distance)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown RunConfig fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> RunConfig:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def with_overrides(self, **kw) -> RunConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


@dataclass
class EvalRecord:
    step: int
    train_loss: float
    dev_loss: float
    dev_bleu: float
    dev_token_acc: float


# --------------------------------------------------------------------------
# data preparation


def load_corpus(path) -> list[tuple[RawRecord, str]]:
    return corpus_from_jsonl(Path(path).read_text(encoding="utf-8"))


def normalize_text(text: str) -> str:
    return " ".join(split_words(text))


@dataclass
class Prepared:
    record: RawRecord
    reference: str
    graph: object
    g2t: TrainingExample


def prepare(corpus, vocab: Vocab, opts: MatrixOptions, directed_only=False, max_len=None) -> list[Prepared]:
    out = []
    for rec, ref in corpus:
        g = record_to_graph(rec, directed_only=directed_only)
        out.append(Prepared(rec, ref, g, make_g2t_example(g, rec, ref, vocab, opts, max_len=max_len)))
    return out


def collate(examples: Sequence[TrainingExample]) -> M.Batch:
    return M.make_batch([e.input.token_ids for e in examples], [e.buckets for e in examples],
                        [e.add_mask for e in examples], [e.target_ids for e in examples], pad_id=PAD)


def input_batch(prepared: Sequence[Prepared]) -> M.Batch:
    return collate([p.g2t for p in prepared])


# --------------------------------------------------------------------------
# evaluation


def evaluate(params, cfg: M.ModelConfig, data: Sequence[Prepared], vocab: Vocab,
             max_decode_len: int = 80, chunk: int = 64) -> dict:
    """Teacher-forced loss and token accuracy plus greedy-decoding BLEU."""
    loss_sum = 0.0
    correct = total = 0
    hyps, refs = [], []
    for s in range(0, len(data), chunk):
        part = data[s:s + chunk]
        batch = input_batch(part)
        loss, logits, _ = M.forward(params, cfg, batch)
        loss_sum += loss * len(part)
        c, t = M.token_accuracy(logits, batch)
        correct += c
        total += t
        for ids in M.greedy_decode(params, cfg, batch, max_steps=max_decode_len):
            hyps.append(vocab.decode(ids))
        refs.extend(normalize_text(p.reference) for p in part)
    return {
        "loss": loss_sum / len(data),
        "token_acc": correct / max(total, 1),
        "bleu": corpus_bleu(hyps, refs),
        "hypotheses": hyps,
    }


# --------------------------------------------------------------------------
# training


def _train_example(p: Prepared, cfg: RunConfig, vocab, rng: np.random.Generator, step: int, slot: int,
                   max_len) -> TrainingExample:
    if cfg.denoise_prob > 0 and rng.random() < cfg.denoise_prob:
        noise_seed = int(np.random.SeedSequence([cfg.seed, step, slot]).generate_state(1)[0])
        return apply_struct_noise(p.graph, p.record, NoiseSpec(cfg.mask_rate, noise_seed), vocab,
                                  cfg.matrix_options, max_len=max_len)
    return p.g2t


def train(cfg: RunConfig, train_corpus=None, dev_corpus=None, vocab: Optional[Vocab] = None,
          progress: bool = False):
    """Run training; returns (best checkpoint path, list of EvalRecord).

    Writes ``config.json``, ``vocab.txt``, ``metrics.jsonl`` and ``best.ckpt``
    into ``cfg.out_dir``. Corpora and vocab may be passed in directly instead
    of via the paths in ``cfg``.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if train_corpus is None:
        train_corpus = load_corpus(cfg.train_path)
    if dev_corpus is None:
        dev_corpus = load_corpus(cfg.dev_path) if cfg.dev_path else train_corpus
    if vocab is None:
        if cfg.vocab_path:
            vocab = Vocab.load(cfg.vocab_path)
        else:
            vocab = build_vocab([r for r, _ in train_corpus], [ref for _, ref in train_corpus], cfg.max_vocab)
    mcfg = cfg.model.build(len(vocab))
    opts = cfg.matrix_options
    train_data = prepare(train_corpus, vocab, opts, cfg.directed_only, mcfg.max_len)
    dev_data = prepare(dev_corpus, vocab, opts, cfg.directed_only, mcfg.max_len)

    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    vocab.save(out / "vocab.txt")
    metrics_path = out / "metrics.jsonl"
    metrics_path.write_text("", encoding="utf-8")
    ckpt = out / "best.ckpt"

    params = M.init_params(mcfg)
    state = M.AdamState()
    rng = np.random.default_rng(cfg.seed)
    order: list[int] = []
    history: list[EvalRecord] = []
    best_bleu, best_step = -math.inf, 0
    recent: list[float] = []

    for step in range(1, cfg.max_steps + 1):
        idx = []
        while len(idx) < cfg.batch_size:
            if not order:
                order = list(rng.permutation(len(train_data)))
            idx.append(int(order.pop()))
        examples = [_train_example(train_data[i], cfg, vocab, rng, step, k, mcfg.max_len)
                    for k, i in enumerate(idx)]
        batch = collate(examples)
        loss, _, grads = M.loss_and_grads(params, mcfg, batch)
        try:
            if not math.isfinite(loss):
                raise FloatingPointError("diverged")
            params, state = M.adam_step(params, grads, state, cfg.lr)
        except FloatingPointError:
            if not ckpt.exists():
                M.save_checkpoint(ckpt, mcfg, params)
            raise TrainingDiverged(f"diverged at step {step}") from None
        recent.append(loss)

        if step % cfg.eval_every == 0:
            ev = evaluate(params, mcfg, dev_data, vocab, cfg.max_decode_len)
            rec = EvalRecord(step, float(np.mean(recent)), ev["loss"], ev["bleu"], ev["token_acc"])
            recent = []
            history.append(rec)
            with metrics_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(asdict(rec)) + "\n")
            if progress:
                log.info("step %d train %.4f dev %.4f bleu %.4f acc %.4f", step, rec.train_loss,
                         rec.dev_loss, rec.dev_bleu, rec.dev_token_acc)
            if rec.dev_bleu > best_bleu:
                best_bleu, best_step = rec.dev_bleu, step
                M.save_checkpoint(ckpt, mcfg, params)
            elif step - best_step >= cfg.patience_steps:
                break
    if not ckpt.exists():
        M.save_checkpoint(ckpt, mcfg, params)
    return ckpt, history


# --------------------------------------------------------------------------
# inference


@dataclass
class LoadedRun:
    cfg: RunConfig
    model_cfg: M.ModelConfig
    params: dict
    vocab: Vocab

    @classmethod
    def from_dir(cls, run_dir, checkpoint=None) -> LoadedRun:
        run_dir = Path(run_dir)
        cfg = RunConfig.load(run_dir / "config.json")
        mcfg, params = M.load_checkpoint(checkpoint or run_dir / "best.ckpt")
        return cls(cfg, mcfg, params, Vocab.load(run_dir / "vocab.txt"))

    def example(self, rec: RawRecord) -> TrainingExample:
        g = record_to_graph(rec, directed_only=self.cfg.directed_only)
        lin = linearize(g, build_prefixes(rec), self.vocab, max_len=self.model_cfg.max_len)
        buckets, mask = structure_matrices(lin, g, self.cfg.matrix_options)
        return TrainingExample(lin, buckets, mask, [PAD], None)

    def generate_many(self, records: Sequence[RawRecord], max_decode_len=None) -> list[str]:
        n = max_decode_len or self.cfg.max_decode_len
        out = []
        for s in range(0, len(records), 64):
            batch = collate([self.example(r) for r in records[s:s + 64]])
            out.extend(self.vocab.decode(ids) for ids in M.greedy_decode(self.params, self.model_cfg, batch, n))
        return out

    def generate(self, rec: RawRecord, max_decode_len=None) -> str:
        return self.generate_many([rec], max_decode_len)[0]


def generate(run_dir, record: RawRecord, checkpoint=None) -> str:
    return LoadedRun.from_dir(run_dir, checkpoint).generate(record)


def evaluate_run(run_dir, corpus, checkpoint=None) -> dict:
    run = LoadedRun.from_dir(run_dir, checkpoint)
    data = prepare(corpus, run.vocab, run.cfg.matrix_options, run.cfg.directed_only, run.model_cfg.max_len)
    return evaluate(run.params, run.model_cfg, data, run.vocab, run.cfg.max_decode_len)
