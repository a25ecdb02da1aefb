"""Central finite-difference check of ``model.backward`` on a small model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as M
from .linearize import build_vocab
from .objectives import NoiseSpec, apply_struct_noise, generate_synthetic_corpus, make_g2t_example
from .unify import record_to_graph


@dataclass
class GradcheckResult:
    per_tensor: dict[str, float]
    max_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol


def small_config(vocab_size: int, seed: int = 0) -> M.ModelConfig:
    return M.ModelConfig(vocab_size=vocab_size, d_model=16, n_heads=2, d_ff=32, n_enc_layers=1,
                         n_dec_layers=1, num_buckets=32, max_distance=128, seed=seed, init_std=0.3)


def small_problem(seed: int = 0, strict_scaling: bool = False):
    """Config, randomized parameters and a padded two-example batch built through the real pipeline.

    The batch mixes a graph-to-text and a struct-denoising example so both
    objectives and padding are exercised.
    """
    corpus = generate_synthetic_corpus(seed + 11, 2, kind_mix=(1, 0, 1), min_triples=1, max_triples=2)
    vocab = build_vocab([r for r, _ in corpus], [ref for _, ref in corpus], max_size=400)
    cfg = small_config(len(vocab), seed)
    cfg.strict_scaling = strict_scaling
    (r0, ref0), (r1, _) = corpus
    ex0 = make_g2t_example(record_to_graph(r0), r0, ref0, vocab)
    ex1 = apply_struct_noise(record_to_graph(r1), r1, NoiseSpec(0.3, seed), vocab)
    batch = M.make_batch([ex0.input.token_ids, ex1.input.token_ids], [ex0.buckets, ex1.buckets],
                         [ex0.add_mask, ex1.add_mask], [ex0.target_ids, ex1.target_ids])
    rng = np.random.default_rng(seed + 1)
    params = M.init_params(cfg)
    for k, v in params.items():
        # non-trivial norm scales and bias tables so every path carries gradient
        if v.ndim == 1:
            params[k] = 1.0 + rng.normal(0, 0.2, v.shape)
        elif k.endswith("rel_bias"):
            params[k] = rng.normal(0, 0.5, v.shape)
    return cfg, params, batch


def numeric_grad(params, cfg, batch, name, step=1e-5):
    w = params[name]
    out = np.zeros_like(w)
    for i in np.ndindex(w.shape):
        orig = w[i]
        w[i] = orig + step
        lp = M.forward(params, cfg, batch)[0]
        w[i] = orig - step
        lm = M.forward(params, cfg, batch)[0]
        w[i] = orig
        out[i] = (lp - lm) / (2 * step)
    return out


def tensor_error(analytic, numeric) -> float:
    """max |a - n| over the tensor, relative to the tensor's largest gradient."""
    scale = max(np.abs(analytic).max(), np.abs(numeric).max())
    if scale == 0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


def run_gradcheck(seed: int = 0, tol: float = 1e-4, step: float = 1e-5, strict_scaling=False) -> GradcheckResult:
    cfg, params, batch = small_problem(seed, strict_scaling)
    _, _, grads = M.loss_and_grads(params, cfg, batch)
    errs = {name: tensor_error(grads[name], numeric_grad(params, cfg, batch, name, step)) for name in params}
    return GradcheckResult(errs, max(errs.values()), tol)
