"""Small encoder-decoder transformer in numpy with a hand-written backward pass.

Layout follows the T5 family: RMS layer norm before every sub-block, no
absolute positions, scalar relative-position biases shared across layers,
tied input/output embeddings. The encoder self-attention takes per-example
bucket and additive-mask matrices, so structural information enters only
there; decoder self-attention is causal with sequential buckets and the
cross-attention only masks padding.

All arrays are float64. Parameters are a flat ``dict[str, ndarray]``.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .matrices import NEG_BLOCK, causal_buckets

EPS_NORM = 1e-6
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass
class ModelConfig:
    vocab_size: int
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
    # scale the bias and mask terms by 1/sqrt(d_head) together with QK^T
    strict_scaling: bool = False

    def __post_init__(self):
        for name in ("vocab_size", "d_model", "n_heads", "d_ff", "n_enc_layers",
                     "n_dec_layers", "num_buckets", "max_distance", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f, nb, h = cfg.d_model, cfg.d_ff, cfg.num_buckets, cfg.n_heads
    shapes: dict[str, tuple[int, ...]] = {"embed": (cfg.vocab_size, d), "enc.rel_bias": (nb, h)}
    for l in range(cfg.n_enc_layers):
        p = f"enc.{l}."
        shapes[p + "ln_attn"] = (d,)
        for w in ("q", "k", "v", "o"):
            shapes[p + f"attn.w{w}"] = (d, d)
        shapes[p + "ln_ff"] = (d,)
        shapes[p + "ff.wi"] = (d, f)
        shapes[p + "ff.wo"] = (f, d)
    shapes["enc.ln_final"] = (d,)
    shapes["dec.rel_bias"] = (nb, h)
    for l in range(cfg.n_dec_layers):
        p = f"dec.{l}."
        shapes[p + "ln_self"] = (d,)
        for w in ("q", "k", "v", "o"):
            shapes[p + f"self.w{w}"] = (d, d)
        shapes[p + "ln_cross"] = (d,)
        for w in ("q", "k", "v", "o"):
            shapes[p + f"cross.w{w}"] = (d, d)
        shapes[p + "ln_ff"] = (d,)
        shapes[p + "ff.wi"] = (d, f)
        shapes[p + "ff.wo"] = (f, d)
    shapes["dec.ln_final"] = (d,)
    return shapes


def init_params(cfg: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("rel_bias"):
            params[name] = np.zeros(shape)
        elif len(shape) == 1:
            params[name] = np.ones(shape)
        else:
            params[name] = rng.normal(0.0, cfg.init_std, size=shape)
    return params


# --------------------------------------------------------------------------
# primitives: each *_fwd returns (out, cache), each *_bwd returns input grads


def rms_fwd(x, g):
    r = np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + EPS_NORM)
    xh = x / r
    return xh * g, (xh, r, g)


def rms_bwd(dy, cache):
    xh, r, g = cache
    dg = np.sum(dy * xh, axis=tuple(range(dy.ndim - 1)))
    dxh = dy * g
    dx = (dxh - xh * np.mean(dxh * xh, axis=-1, keepdims=True)) / r
    return dx, dg


def gelu_fwd(x):
    t = np.tanh(_GELU_C * x * (1.0 + 0.044715 * x * x))
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_bwd(dy, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


def softmax(s, axis=-1):
    e = np.exp(s - s.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _wgrad(x, dy):
    """Weight gradient of ``x @ W`` summed over all leading axes."""
    return x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])


def _split_heads(x, h):
    b, t, d = x.shape
    return x.reshape(b, t, h, d // h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def attn_fwd(xq, xkv, wq, wk, wv, wo, bias, n_heads, scale_bias=False):
    """Multi-head attention; ``bias`` is additive, broadcastable to (B, H, Tq, Tk)."""
    q = _split_heads(xq @ wq, n_heads)
    k = _split_heads(xkv @ wk, n_heads)
    v = _split_heads(xkv @ wv, n_heads)
    sc = 1.0 / math.sqrt(q.shape[-1])
    s = q @ k.transpose(0, 1, 3, 2)
    s = (s + bias) * sc if scale_bias else s * sc + bias
    p = softmax(s)
    ctx = _merge_heads(p @ v)
    out = ctx @ wo
    return out, (xq, xkv, wq, wk, wv, wo, q, k, v, p, ctx, sc, scale_bias, n_heads)


def attn_bwd(dout, cache):
    """Returns (dxq, dxkv, {wq,wk,wv,wo grads}, dbias) with dbias shaped (B, H, Tq, Tk)."""
    xq, xkv, wq, wk, wv, wo, q, k, v, p, ctx, sc, scale_bias, h = cache
    g = {"wo": _wgrad(ctx, dout)}
    dctx = _split_heads(dout @ wo.T, h)
    dp = dctx @ v.transpose(0, 1, 3, 2)
    dv = p.transpose(0, 1, 3, 2) @ dctx
    ds = p * (dp - np.sum(dp * p, axis=-1, keepdims=True))
    dbias = ds * sc if scale_bias else ds
    ds = ds * sc
    dq = _merge_heads(ds @ k)
    dk = _merge_heads(ds.transpose(0, 1, 3, 2) @ q)
    dv = _merge_heads(dv)
    g["wq"] = _wgrad(xq, dq)
    g["wk"] = _wgrad(xkv, dk)
    g["wv"] = _wgrad(xkv, dv)
    dxq = dq @ wq.T
    dxkv = dk @ wk.T + dv @ wv.T
    return dxq, dxkv, g, dbias


def ff_fwd(x, wi, wo):
    hpre = x @ wi
    hact, gcache = gelu_fwd(hpre)
    return hact @ wo, (x, wi, wo, hact, gcache)


def ff_bwd(dy, cache):
    x, wi, wo, hact, gcache = cache
    dwo = _wgrad(hact, dy)
    dh = gelu_bwd(dy @ wo.T, gcache)
    dwi = _wgrad(x, dh)
    return dh @ wi.T, dwi, dwo


def bias_from_table(table, buckets):
    """(nb, H) table gathered by (B, Tq, Tk) or (Tq, Tk) buckets -> (B|1, H, Tq, Tk)."""
    b = table[buckets]
    if b.ndim == 3:
        return b.transpose(2, 0, 1)[None]
    return b.transpose(0, 3, 1, 2)


def table_grad(dbias, buckets, num_buckets):
    """Scatter-add a (B, H, Tq, Tk) bias gradient back into its (nb, H) table."""
    n_heads = dbias.shape[1]
    if buckets.ndim == 2:
        dsum = dbias.sum(axis=0)
        flat = np.broadcast_to(buckets, dsum.shape[1:]).ravel()
        return np.stack([np.bincount(flat, weights=dsum[hh].ravel(), minlength=num_buckets)
                         for hh in range(n_heads)], axis=1)
    flat = buckets.ravel()
    return np.stack([np.bincount(flat, weights=dbias[:, hh].ravel(), minlength=num_buckets)
                     for hh in range(n_heads)], axis=1)


# --------------------------------------------------------------------------
# batches


@dataclass
class Batch:
    enc_ids: np.ndarray      # (B, M) int
    enc_buckets: np.ndarray  # (B, M, M) int
    enc_mask: np.ndarray     # (B, M, M) additive float
    enc_valid: np.ndarray    # (B, M) bool
    dec_in: np.ndarray       # (B, N) int
    targets: np.ndarray      # (B, N) int
    tgt_valid: np.ndarray    # (B, N) bool

    def __len__(self):
        return self.enc_ids.shape[0]


def make_batch(enc_ids, buckets, masks, targets=None, pad_id=0) -> Batch:
    """Pad variable-length examples into a Batch.

    Padded encoder positions attend only to themselves and are invisible to
    real tokens. ``targets`` are shifted right with ``pad_id`` as start token.
    """
    bsz = len(enc_ids)
    M = max(len(x) for x in enc_ids)
    ids = np.full((bsz, M), pad_id, dtype=np.int64)
    bk = np.zeros((bsz, M, M), dtype=np.int64)
    mk = np.full((bsz, M, M), NEG_BLOCK)
    valid = np.zeros((bsz, M), dtype=bool)
    diag = np.arange(M)
    for b in range(bsz):
        m = len(enc_ids[b])
        ids[b, :m] = enc_ids[b]
        bk[b, :m, :m] = buckets[b]
        mk[b, :m, :m] = masks[b]
        mk[b, diag[m:], diag[m:]] = 0.0
        valid[b, :m] = True
    if targets is None:
        targets = [[pad_id]] * bsz
    N = max(len(t) for t in targets)
    tgt = np.full((bsz, N), pad_id, dtype=np.int64)
    tvalid = np.zeros((bsz, N), dtype=bool)
    for b, t in enumerate(targets):
        tgt[b, :len(t)] = t
        tvalid[b, :len(t)] = True
    dec_in = np.full((bsz, N), pad_id, dtype=np.int64)
    dec_in[:, 1:] = tgt[:, :-1]
    return Batch(ids, bk, mk, valid, dec_in, tgt, tvalid)


# --------------------------------------------------------------------------
# forward


def _check_len(n, cfg, what):
    if n > cfg.max_len:
        raise ValueError(f"{what} length {n} exceeds max_len={cfg.max_len}")


def encode_batch(params, cfg: ModelConfig, ids, buckets=None, add_mask=None, trace=None):
    """Encoder over (B, M) token ids. ``buckets``/``add_mask`` None means a plain encoder."""
    _check_len(ids.shape[1], cfg, "input")
    x = params["embed"][ids]
    if buckets is not None:
        bias = bias_from_table(params["enc.rel_bias"], buckets)
    else:
        bias = np.zeros((1, 1, 1, 1))
    if add_mask is not None:
        bias = bias + add_mask[:, None]
    layers = []
    for l in range(cfg.n_enc_layers):
        p = f"enc.{l}."
        hn, c_ln1 = rms_fwd(x, params[p + "ln_attn"])
        a, c_att = attn_fwd(hn, hn, params[p + "attn.wq"], params[p + "attn.wk"], params[p + "attn.wv"],
                            params[p + "attn.wo"], bias, cfg.n_heads, cfg.strict_scaling)
        x = x + a
        hn, c_ln2 = rms_fwd(x, params[p + "ln_ff"])
        f, c_ff = ff_fwd(hn, params[p + "ff.wi"], params[p + "ff.wo"])
        x = x + f
        layers.append((c_ln1, c_att, c_ln2, c_ff))
    out, c_fin = rms_fwd(x, params["enc.ln_final"])
    if trace is not None:
        trace.update(enc_layers=layers, enc_fin=c_fin, enc_ids=ids, enc_buckets=buckets,
                     enc_structured=buckets is not None)
    return out


def decode_batch(params, cfg: ModelConfig, dec_in, enc_out, enc_valid=None, trace=None):
    """Decoder logits (B, N, V) for already-shifted decoder inputs."""
    bsz, n = dec_in.shape
    _check_len(n, cfg, "target")
    y = params["embed"][dec_in]
    cb = causal_buckets(n, cfg.num_buckets, cfg.max_distance)
    future = np.triu(np.ones((n, n), dtype=bool), 1)
    self_bias = bias_from_table(params["dec.rel_bias"], cb) + np.where(future, NEG_BLOCK, 0.0)[None, None]
    if enc_valid is None:
        cross_bias = np.zeros((1, 1, 1, 1))
    else:
        cross_bias = np.where(enc_valid, 0.0, NEG_BLOCK)[:, None, None, :]
    layers = []
    for l in range(cfg.n_dec_layers):
        p = f"dec.{l}."
        hn, c1 = rms_fwd(y, params[p + "ln_self"])
        a, ca = attn_fwd(hn, hn, params[p + "self.wq"], params[p + "self.wk"], params[p + "self.wv"],
                         params[p + "self.wo"], self_bias, cfg.n_heads)
        y = y + a
        hn, c2 = rms_fwd(y, params[p + "ln_cross"])
        a, cx = attn_fwd(hn, enc_out, params[p + "cross.wq"], params[p + "cross.wk"], params[p + "cross.wv"],
                         params[p + "cross.wo"], cross_bias, cfg.n_heads)
        y = y + a
        hn, c3 = rms_fwd(y, params[p + "ln_ff"])
        f, cf = ff_fwd(hn, params[p + "ff.wi"], params[p + "ff.wo"])
        y = y + f
        layers.append((c1, ca, c2, cx, c3, cf))
    hfin, c_fin = rms_fwd(y, params["dec.ln_final"])
    osc = cfg.d_model ** -0.5
    logits = hfin @ params["embed"].T * osc
    if trace is not None:
        trace.update(dec_layers=layers, dec_fin=c_fin, dec_in=dec_in, dec_h=hfin, dec_buckets=cb, out_scale=osc)
    return logits


def encode(params, cfg, token_ids, buckets=None, add_mask=None):
    """Single-example encoder: (m,) ids -> (m, d_model) states."""
    ids = np.asarray(token_ids, dtype=np.int64)[None]
    b = None if buckets is None else np.asarray(buckets)[None]
    mk = None if add_mask is None else np.asarray(add_mask, dtype=np.float64)[None]
    return encode_batch(params, cfg, ids, b, mk)[0]


def decode(params, cfg, target_ids, encoder_states):
    """Single-example decoder: shifted (n,) ids and (m, d) states -> (n, V) logits."""
    ids = np.asarray(target_ids, dtype=np.int64)[None]
    return decode_batch(params, cfg, ids, np.asarray(encoder_states)[None])[0]


def loss_nll(logits, target_ids, pad_id=0):
    """Mean negative log-likelihood over non-pad positions of one sequence."""
    logits = np.asarray(logits, dtype=np.float64)
    t = np.asarray(target_ids)
    keep = t != pad_id
    if not keep.any():
        raise ValueError("empty target")
    z = logits[keep]
    lse = z.max(-1) + np.log(np.exp(z - z.max(-1, keepdims=True)).sum(-1))
    return float(np.mean(lse - z[np.arange(len(z)), t[keep]]))


def _batch_loss(logits, batch: Batch):
    """Per-sequence mean NLL, averaged over the batch; plus d(loss)/d(logits)."""
    counts = batch.tgt_valid.sum(axis=1)
    if (counts == 0).any():
        raise ValueError("empty target")
    w = batch.tgt_valid / (counts[:, None] * len(batch))
    z = logits - logits.max(-1, keepdims=True)
    e = np.exp(z)
    se = e.sum(-1, keepdims=True)
    logp = z - np.log(se)
    tl = np.take_along_axis(logp, batch.targets[..., None], -1)[..., 0]
    loss = float(-(tl * w).sum())
    dlogits = e / se
    np.put_along_axis(dlogits, batch.targets[..., None],
                      np.take_along_axis(dlogits, batch.targets[..., None], -1) - 1.0, -1)
    dlogits *= w[..., None]
    return loss, dlogits


def forward(params, cfg: ModelConfig, batch: Batch, position_bias: bool = True):
    """Teacher-forced forward pass. Returns (loss, logits, trace)."""
    trace: dict = {}
    enc_out = encode_batch(params, cfg, batch.enc_ids,
                           batch.enc_buckets if position_bias else None,
                           batch.enc_mask, trace=trace)
    logits = decode_batch(params, cfg, batch.dec_in, enc_out, batch.enc_valid, trace=trace)
    loss, dlogits = _batch_loss(logits, batch)
    trace["dlogits"] = dlogits
    trace["enc_out"] = enc_out
    return loss, logits, trace


def token_accuracy(logits, batch: Batch) -> tuple[int, int]:
    pred = logits.argmax(-1)
    ok = (pred == batch.targets) & batch.tgt_valid
    return int(ok.sum()), int(batch.tgt_valid.sum())


def backward(params, cfg: ModelConfig, trace) -> dict[str, np.ndarray]:
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    osc = trace["out_scale"]
    dlogits = trace["dlogits"]
    hfin = trace["dec_h"]
    grads["embed"] += osc * _wgrad(dlogits, hfin)
    dy = osc * dlogits @ params["embed"]
    dy, grads["dec.ln_final"] = rms_bwd(dy, trace["dec_fin"])

    denc = np.zeros_like(trace["enc_out"])
    dself_bias = 0.0
    for l in reversed(range(cfg.n_dec_layers)):
        p = f"dec.{l}."
        c1, ca, c2, cx, c3, cf = trace["dec_layers"][l]
        dh, grads[p + "ff.wi"], grads[p + "ff.wo"] = ff_bwd(dy, cf)
        dx, grads[p + "ln_ff"] = rms_bwd(dh, c3)
        dy = dy + dx
        dq, dkv, g, _ = attn_bwd(dy, cx)
        for w in ("q", "k", "v", "o"):
            grads[p + f"cross.w{w}"] = g[f"w{w}"]
        denc += dkv
        dx, grads[p + "ln_cross"] = rms_bwd(dq, c2)
        dy = dy + dx
        dq, dkv, g, db = attn_bwd(dy, ca)
        for w in ("q", "k", "v", "o"):
            grads[p + f"self.w{w}"] = g[f"w{w}"]
        dself_bias = dself_bias + db
        dx, grads[p + "ln_self"] = rms_bwd(dq + dkv, c1)
        dy = dy + dx
    if cfg.n_dec_layers:
        grads["dec.rel_bias"] = table_grad(dself_bias, trace["dec_buckets"], cfg.num_buckets)
    np.add.at(grads["embed"], trace["dec_in"], dy)

    dx_enc, grads["enc.ln_final"] = rms_bwd(denc, trace["enc_fin"])
    denc_bias = 0.0
    for l in reversed(range(cfg.n_enc_layers)):
        p = f"enc.{l}."
        c_ln1, c_att, c_ln2, c_ff = trace["enc_layers"][l]
        dh, grads[p + "ff.wi"], grads[p + "ff.wo"] = ff_bwd(dx_enc, c_ff)
        dx, grads[p + "ln_ff"] = rms_bwd(dh, c_ln2)
        dx_enc = dx_enc + dx
        dq, dkv, g, db = attn_bwd(dx_enc, c_att)
        for w in ("q", "k", "v", "o"):
            grads[p + f"attn.w{w}"] = g[f"w{w}"]
        denc_bias = denc_bias + db
        dx, grads[p + "ln_attn"] = rms_bwd(dq + dkv, c_ln1)
        dx_enc = dx_enc + dx
    if trace["enc_structured"] and cfg.n_enc_layers:
        grads["enc.rel_bias"] = table_grad(denc_bias, trace["enc_buckets"], cfg.num_buckets)
    np.add.at(grads["embed"], trace["enc_ids"], dx_enc)
    return grads


def loss_and_grads(params, cfg, batch, position_bias=True):
    loss, logits, trace = forward(params, cfg, batch, position_bias)
    return loss, logits, backward(params, cfg, trace)


# --------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def clip_by_global_norm(grads, max_norm=1.0):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if not math.isfinite(norm):
        raise FloatingPointError("diverged")
    if norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


def adam_step(params, grads, state: AdamState, lr, clip=1.0, b1=0.9, b2=0.999, eps=1e-8):
    """One Adam update with bias correction after global-norm clipping.

    Returns new ``(params, state)``; inputs are not mutated.
    """
    if clip is not None:
        grads, _ = clip_by_global_norm(grads, clip)
    else:
        for g in grads.values():
            if not np.isfinite(g).all():
                raise FloatingPointError("diverged")
    t = state.step + 1
    new_p, new_m, new_v = {}, {}, {}
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for k, w in params.items():
        g = grads[k]
        m = b1 * state.m.get(k, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(k, 0.0) + (1 - b2) * g * g
        new_m[k], new_v[k] = m, v
        new_p[k] = w - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return new_p, AdamState(t, new_m, new_v)


# --------------------------------------------------------------------------
# decoding


def greedy_decode(params, cfg, batch: Batch, max_steps: Optional[int] = None, position_bias=True, eos_id=1):
    """Greedy argmax decoding from PAD; returns a list of id lists without EOS."""
    enc_out = encode_batch(params, cfg, batch.enc_ids, batch.enc_buckets if position_bias else None, batch.enc_mask)
    steps = min(max_steps or cfg.max_len, cfg.max_len)
    bsz = len(batch)
    seq = np.zeros((bsz, 1), dtype=np.int64)
    done = np.zeros(bsz, dtype=bool)
    out: list[list[int]] = [[] for _ in range(bsz)]
    for _ in range(steps):
        logits = decode_batch(params, cfg, seq, enc_out, batch.enc_valid)
        nxt = logits[:, -1].argmax(-1)
        for b in range(bsz):
            if not done[b]:
                if nxt[b] == eos_id:
                    done[b] = True
                else:
                    out[b].append(int(nxt[b]))
        if done.all() or seq.shape[1] >= steps:
            break
        seq = np.concatenate([seq, nxt[:, None]], axis=1)
    return out


# --------------------------------------------------------------------------
# checkpoints

MAGIC = b"UD2T"
FORMAT_VERSION = 1


def save_checkpoint(path, cfg: ModelConfig, params) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(cfg, params))


def checkpoint_bytes(cfg: ModelConfig, params) -> bytes:
    cfg_json = json.dumps(asdict(cfg), sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(cfg_json)), cfg_json, struct.pack("<I", len(params))]
    for name in param_shapes(cfg):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        bname = name.encode("utf-8")
        parts.append(struct.pack("<I", len(bname)) + bname)
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return checkpoint_from_bytes(data)


def checkpoint_from_bytes(data: bytes):
    if data[:4] != MAGIC:
        raise ValueError("not a checkpoint (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 12
    cfg = ModelConfig(**json.loads(data[off:off + n].decode("utf-8")))
    off += n
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    params = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        name = data[off:off + ln].decode("utf-8")
        off += ln
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}Q", data, off)
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += 8 * size
    expected = param_shapes(cfg)
    if set(params) != set(expected) or any(params[k].shape != s for k, s in expected.items()):
        raise ValueError("checkpoint tensors do not match its config")
    return cfg, params
