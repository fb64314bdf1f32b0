"""Student translation model: transformer encoder, gated-recurrence decoder,
shortlisted tied output layer, greedy batched decoding, binary loading.

Every weight multiply runs through the exact-integer quantized GEMM and every
attention reduction is arranged so each output element reduces over a
fixed-length axis or a zero-padded tail. Consequence: a sentence's tokens are
bit-identical whether it is decoded alone or inside any batch, at any thread
count. Tests rely on that equality being exact, not approximate.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    InputValidationError,
    ModelFormatError,
    ShapeMismatchError,
    TranslationCancelled,
    TruncatedBlobError,
    UnknownFormatVersionError,
)
from .tensor import QuantizedMatrix, dequantize, gemm_q8, matrix_from_bytes, matrix_to_bytes, quantize

BLOB_MAGIC = b"LMTW"
BLOB_VERSION = 1

LN_EPS = np.float32(1e-5)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; carried by the package manifest."""

    vocab_size: int
    emb_dim: int
    enc_layers: int
    dec_layers: int
    heads: int
    ffn_dim: int
    max_src_len: int
    max_len_factor: float
    eos_id: int
    unk_id: int
    pad_id: int

    def __post_init__(self) -> None:
        counts = {
            "vocab_size": self.vocab_size,
            "emb_dim": self.emb_dim,
            "enc_layers": self.enc_layers,
            "dec_layers": self.dec_layers,
            "heads": self.heads,
            "ffn_dim": self.ffn_dim,
            "max_src_len": self.max_src_len,
        }
        for name, value in counts.items():
            if not isinstance(value, int) or value <= 0:
                raise InputValidationError(f"{name} must be a positive integer")
        if self.emb_dim % self.heads:
            raise InputValidationError("emb_dim must be divisible by heads")
        if self.max_len_factor <= 0:
            raise InputValidationError("max_len_factor must be > 0")
        specials = (self.eos_id, self.unk_id, self.pad_id)
        if len(set(specials)) != 3:
            raise InputValidationError("eos/unk/pad ids must be pairwise distinct")
        for sid in specials:
            if not 0 <= sid < self.vocab_size:
                raise InputValidationError("special token ids must be < vocab_size")

    @property
    def head_dim(self) -> int:
        return self.emb_dim // self.heads

    def target_len_cap(self, src_len: int) -> int:
        return math.ceil(src_len * self.max_len_factor) + 1

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "emb_dim": self.emb_dim,
            "enc_layers": self.enc_layers,
            "dec_layers": self.dec_layers,
            "heads": self.heads,
            "ffn_dim": self.ffn_dim,
            "max_src_len": self.max_src_len,
            "max_len_factor": self.max_len_factor,
            "eos_id": self.eos_id,
            "unk_id": self.unk_id,
            "pad_id": self.pad_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        try:
            return cls(**{k: d[k] for k in cls.__dataclass_fields__})
        except KeyError as exc:
            raise InputValidationError(f"missing config field: {exc}") from exc


@dataclass
class AttentionWeights:
    wq: QuantizedMatrix
    bq: np.ndarray
    wk: QuantizedMatrix
    bk: np.ndarray
    wv: QuantizedMatrix
    bv: np.ndarray
    wo: QuantizedMatrix
    bo: np.ndarray


@dataclass
class EncoderLayerWeights:
    attn_ln_gain: np.ndarray
    attn_ln_bias: np.ndarray
    attn: AttentionWeights
    ffn_ln_gain: np.ndarray
    ffn_ln_bias: np.ndarray
    ffn_w1: QuantizedMatrix
    ffn_b1: np.ndarray
    ffn_w2: QuantizedMatrix
    ffn_b2: np.ndarray


@dataclass
class DecoderLayerWeights:
    """Gated-recurrence decoder layer: forget gate W_f/b_f, cell input W_c,
    then cross-attention and FFN, all pre-norm with residuals."""

    ssru_ln_gain: np.ndarray
    ssru_ln_bias: np.ndarray
    w_f: QuantizedMatrix
    b_f: np.ndarray
    w_c: QuantizedMatrix
    xattn_ln_gain: np.ndarray
    xattn_ln_bias: np.ndarray
    xattn: AttentionWeights
    ffn_ln_gain: np.ndarray
    ffn_ln_bias: np.ndarray
    ffn_w1: QuantizedMatrix
    ffn_b1: np.ndarray
    ffn_w2: QuantizedMatrix
    ffn_b2: np.ndarray


def _hconcat(*mats: QuantizedMatrix) -> QuantizedMatrix:
    """Column-concatenate quantized matrices. Per-column scales make this
    bit-exact: the fused GEMM equals the separate GEMMs column for column."""
    return QuantizedMatrix(
        data=np.hstack([m.data for m in mats]),
        scales=np.concatenate([m.scales for m in mats]),
    )


@dataclass
class Model:
    config: ModelConfig
    embeddings: QuantizedMatrix  # (vocab, emb); output layer is the transpose tie
    enc_layers: list[EncoderLayerWeights]
    dec_layers: list[DecoderLayerWeights]
    enc_final_ln_gain: np.ndarray
    enc_final_ln_bias: np.ndarray
    dec_final_ln_gain: np.ndarray
    dec_final_ln_bias: np.ndarray

    # caches derived in __post_init__
    emb_f32: np.ndarray = field(init=False, repr=False)
    pos_table: np.ndarray = field(init=False, repr=False)
    emb_scale: np.float32 = field(init=False, repr=False)
    _enc_qkv: list[tuple[QuantizedMatrix, np.ndarray]] = field(init=False, repr=False)
    _dec_gate: list[tuple[QuantizedMatrix, np.ndarray]] = field(init=False, repr=False)
    _dec_kv: list[tuple[QuantizedMatrix, np.ndarray]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        cfg = self.config
        if self.embeddings.rows != cfg.vocab_size or self.embeddings.cols != cfg.emb_dim:
            raise ShapeMismatchError("embedding table shape disagrees with config")
        if len(self.enc_layers) != cfg.enc_layers or len(self.dec_layers) != cfg.dec_layers:
            raise ShapeMismatchError("layer count disagrees with config")
        self.emb_f32 = dequantize(self.embeddings)
        self.pos_table = sinusoidal_positions(
            max(cfg.max_src_len, cfg.target_len_cap(cfg.max_src_len)), cfg.emb_dim
        )
        self.emb_scale = np.float32(math.sqrt(cfg.emb_dim))
        # fuse side-by-side projections once; exact by per-column scaling
        self._enc_qkv = [
            (
                _hconcat(l.attn.wq, l.attn.wk, l.attn.wv),
                np.concatenate([l.attn.bq, l.attn.bk, l.attn.bv]),
            )
            for l in self.enc_layers
        ]
        self._dec_gate = [
            (
                _hconcat(l.w_f, l.w_c),
                np.concatenate([l.b_f, np.zeros(cfg.emb_dim, np.float32)]),
            )
            for l in self.dec_layers
        ]
        self._dec_kv = [
            (
                _hconcat(l.xattn.wk, l.xattn.wv),
                np.concatenate([l.xattn.bk, l.xattn.bv]),
            )
            for l in self.dec_layers
        ]


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    table = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(np.float32)


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + LN_EPS) * gain + bias


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def _split_heads(x: np.ndarray, batch: int, seq: int, heads: int, head_dim: int) -> np.ndarray:
    return np.ascontiguousarray(
        x.reshape(batch, seq, heads, head_dim).transpose(0, 2, 1, 3)
    )


def _attend(
    q: np.ndarray,            # (B, H, Tq, Dh), already scaled by 1/sqrt(Dh)
    k: np.ndarray,            # (B, H, Tk, Dh)
    v_ext: np.ndarray,        # (B, H, Tk, Dh+1), last column all ones
    key_mask: np.ndarray,     # (B, 1, 1, Tk) bool, True = real position
) -> np.ndarray:
    """Masked scaled dot-product attention, bit-stable under zero padding.

    Scores reduce over the fixed head dimension; the value contraction (with a
    ones column providing the softmax denominator) reduces over keys where
    padded positions contribute exact zeros. Both contractions are einsum
    two-operand loops, which accumulate in a padding-append-invariant order.
    """
    scores = np.einsum("bhqd,bhkd->bhqk", q, k)
    scores = np.where(key_mask, scores, -np.inf)
    peak = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - peak)
    weighted = np.einsum("bhqk,bhkd->bhqd", e, v_ext)
    return weighted[..., :-1] / weighted[..., -1:]


def _merge_heads(ctx: np.ndarray) -> np.ndarray:
    b, h, t, d = ctx.shape
    return np.ascontiguousarray(ctx.transpose(0, 2, 1, 3)).reshape(b, t, h * d)


def _extend_ones(v: np.ndarray) -> np.ndarray:
    ones = np.ones(v.shape[:-1] + (1,), np.float32)
    return np.concatenate([v, ones], axis=-1)


def _embed(model: Model, ids: np.ndarray, positions_from: int = 0) -> np.ndarray:
    """Scaled embedding lookup plus sinusoidal position encodings."""
    x = model.emb_f32[ids] * model.emb_scale
    length = ids.shape[-1]
    return x + model.pos_table[positions_from : positions_from + length]


def encode(model: Model, token_ids: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the pre-norm transformer encoder over a padded id matrix.

    Returns (states (B, T, emb), mask (B, T) bool). Padding positions are
    masked out of attention and zeroed in the returned states.
    """
    cfg = model.config
    token_ids = np.asarray(token_ids)
    if token_ids.ndim != 2:
        raise InputValidationError("token_ids must be a 2-D padded matrix")
    batch, seq = token_ids.shape
    if seq > cfg.max_src_len:
        raise InputValidationError(
            f"sequence of {seq} tokens exceeds max_src_len={cfg.max_src_len}"
        )
    if token_ids.size and (token_ids.min() < 0 or token_ids.max() >= cfg.vocab_size):
        raise InputValidationError("token id out of range")
    lengths = np.asarray(lengths)
    if lengths.shape != (batch,) or (lengths <= 0).any() or (lengths > seq).any():
        raise InputValidationError("lengths must be in [1, padded width] per sentence")

    mask = np.arange(seq)[None, :] < lengths[:, None]          # (B, T)
    key_mask = mask[:, None, None, :]                          # (B, 1, 1, T)
    scale = np.float32(1.0 / math.sqrt(cfg.head_dim))

    x = _embed(model, token_ids)
    for layer, (wqkv, bqkv) in zip(model.enc_layers, model._enc_qkv):
        h = layer_norm(x, layer.attn_ln_gain, layer.attn_ln_bias)
        qkv = gemm_q8(h.reshape(batch * seq, cfg.emb_dim), wqkv, bqkv)
        qkv = qkv.reshape(batch, seq, 3, cfg.heads, cfg.head_dim)
        q = np.ascontiguousarray(qkv[:, :, 0].transpose(0, 2, 1, 3)) * scale
        k = np.ascontiguousarray(qkv[:, :, 1].transpose(0, 2, 1, 3))
        v = np.ascontiguousarray(qkv[:, :, 2].transpose(0, 2, 1, 3))
        ctx = _attend(q, k, _extend_ones(v), key_mask)
        attn_out = gemm_q8(
            _merge_heads(ctx).reshape(batch * seq, cfg.emb_dim),
            layer.attn.wo,
            layer.attn.bo,
        ).reshape(batch, seq, cfg.emb_dim)
        x = x + attn_out
        h = layer_norm(x, layer.ffn_ln_gain, layer.ffn_ln_bias)
        ff = gemm_q8(h.reshape(batch * seq, cfg.emb_dim), layer.ffn_w1, layer.ffn_b1)
        ff = np.maximum(ff, np.float32(0.0))
        ff = gemm_q8(ff, layer.ffn_w2, layer.ffn_b2).reshape(batch, seq, cfg.emb_dim)
        x = x + ff
    x = layer_norm(x, model.enc_final_ln_gain, model.enc_final_ln_bias)
    return x * mask[:, :, None], mask


@dataclass
class DecoderState:
    """Per-batch decoding state: one recurrence cell per layer plus the
    cross-attention keys/values precomputed from the encoder states."""

    cells: list[np.ndarray]          # per layer (B, emb)
    enc_keys: list[np.ndarray]       # per layer (B, H, Ts, Dh)
    enc_vals_ext: list[np.ndarray]   # per layer (B, H, Ts, Dh + 1)
    key_mask: np.ndarray             # (B, 1, 1, Ts) bool
    step: int = 0

    @property
    def batch(self) -> int:
        return self.cells[0].shape[0]

    def select_rows(self, keep: np.ndarray) -> "DecoderState":
        return DecoderState(
            cells=[c[keep] for c in self.cells],
            enc_keys=[k[keep] for k in self.enc_keys],
            enc_vals_ext=[v[keep] for v in self.enc_vals_ext],
            key_mask=self.key_mask[keep],
            step=self.step,
        )


def make_decoder_state(model: Model, enc_states: np.ndarray, mask: np.ndarray) -> DecoderState:
    cfg = model.config
    batch, seq, _ = enc_states.shape
    flat = enc_states.reshape(batch * seq, cfg.emb_dim)
    keys, vals = [], []
    for layer, (wkv, bkv) in zip(model.dec_layers, model._dec_kv):
        kv = gemm_q8(flat, wkv, bkv).reshape(batch, seq, 2, cfg.heads, cfg.head_dim)
        keys.append(np.ascontiguousarray(kv[:, :, 0].transpose(0, 2, 1, 3)))
        vals.append(_extend_ones(np.ascontiguousarray(kv[:, :, 1].transpose(0, 2, 1, 3))))
    return DecoderState(
        cells=[np.zeros((batch, cfg.emb_dim), np.float32) for _ in model.dec_layers],
        enc_keys=keys,
        enc_vals_ext=vals,
        key_mask=mask[:, None, None, :],
    )


def decode_step(
    model: Model,
    state: DecoderState,
    prev_tokens: np.ndarray,
    candidates: np.ndarray,
) -> tuple[np.ndarray, DecoderState]:
    """One greedy decoding step over the batch.

    Logits are computed only over the candidate rows of the tied embedding
    table; each logit element is the same bit pattern it would have inside a
    full-vocabulary output layer.
    """
    cfg = model.config
    candidates = np.asarray(candidates)
    if candidates.size == 0:
        raise InputValidationError("candidate list must not be empty")
    if candidates.min() < 0 or candidates.max() >= cfg.vocab_size:
        raise InputValidationError("candidate id out of vocabulary range")
    if cfg.eos_id not in candidates or cfg.unk_id not in candidates:
        raise InputValidationError("candidates must include eos and unk")

    batch = state.batch
    scale = np.float32(1.0 / math.sqrt(cfg.head_dim))
    x = _embed(model, np.asarray(prev_tokens).reshape(batch, 1), positions_from=state.step)
    x = x.reshape(batch, cfg.emb_dim)

    new_cells = []
    for i, layer in enumerate(model.dec_layers):
        # gated recurrence: f = sigma(W_f x + b_f); c = f*c_prev + (1-f)*(W_c x)
        h = layer_norm(x, layer.ssru_ln_gain, layer.ssru_ln_bias)
        gates = gemm_q8(h, *model._dec_gate[i])
        f = _sigmoid(gates[:, : cfg.emb_dim])
        cell_in = gates[:, cfg.emb_dim :]
        cell = f * state.cells[i] + (np.float32(1.0) - f) * cell_in
        new_cells.append(cell)
        x = x + np.maximum(cell, np.float32(0.0))

        h = layer_norm(x, layer.xattn_ln_gain, layer.xattn_ln_bias)
        q = gemm_q8(h, layer.xattn.wq, layer.xattn.bq)
        q = _split_heads(q, batch, 1, cfg.heads, cfg.head_dim) * scale
        ctx = _attend(q, state.enc_keys[i], state.enc_vals_ext[i], state.key_mask)
        x = x + gemm_q8(_merge_heads(ctx).reshape(batch, cfg.emb_dim), layer.xattn.wo, layer.xattn.bo)

        h = layer_norm(x, layer.ffn_ln_gain, layer.ffn_ln_bias)
        ff = np.maximum(gemm_q8(h, layer.ffn_w1, layer.ffn_b1), np.float32(0.0))
        x = x + gemm_q8(ff, layer.ffn_w2, layer.ffn_b2)

    x = layer_norm(x, model.dec_final_ln_gain, model.dec_final_ln_bias)
    # tied output layer restricted to candidate rows; reduction length is
    # emb_dim, so each logit is independent of the candidate subset
    logits = np.einsum("be,ce->bc", x, model.emb_f32[candidates])
    new_state = DecoderState(
        cells=new_cells,
        enc_keys=state.enc_keys,
        enc_vals_ext=state.enc_vals_ext,
        key_mask=state.key_mask,
        step=state.step + 1,
    )
    return logits, new_state


def translate_batch(
    model: Model,
    sentences: list[list[int]],
    candidates: list[int] | np.ndarray,
    cancelled=None,
) -> list[list[int]]:
    """Greedy batched decoding. Per sentence, decoding stops at eos or at
    ceil(src_len * max_len_factor) + 1 tokens; outputs include the final eos
    when one was produced. Output order matches input order, and every token
    equals what single-sentence decoding would produce.
    """
    cfg = model.config
    if not sentences:
        return []
    candidates = np.unique(np.asarray(list(candidates), dtype=np.int64))
    outputs: list[list[int]] = [[] for _ in sentences]

    # empty sources decode to a bare eos without touching the network
    nonempty = [i for i, s in enumerate(sentences) if len(s) > 0]
    for i, s in enumerate(sentences):
        if len(s) == 0:
            outputs[i] = [cfg.eos_id]
    if not nonempty:
        return outputs

    lengths = np.array([len(sentences[i]) for i in nonempty], dtype=np.int64)
    width = int(lengths.max())
    ids = np.full((len(nonempty), width), cfg.pad_id, dtype=np.int64)
    for row, i in enumerate(nonempty):
        ids[row, : len(sentences[i])] = sentences[i]

    enc_states, mask = encode(model, ids, lengths)
    state = make_decoder_state(model, enc_states, mask)
    caps = np.array([cfg.target_len_cap(int(n)) for n in lengths])
    rows = np.array(nonempty)
    prev = np.full(len(nonempty), cfg.eos_id, dtype=np.int64)  # decoder start token

    while rows.size:
        if cancelled is not None and cancelled():
            raise TranslationCancelled("translation cancelled between decode steps")
        logits, state = decode_step(model, state, prev, candidates)
        # first-maximum argmax over ascending candidate ids breaks ties low
        tokens = candidates[np.argmax(logits, axis=1)]
        finished = np.zeros(rows.size, dtype=bool)
        for j, tok in enumerate(tokens):
            out = outputs[rows[j]]
            out.append(int(tok))
            if tok == cfg.eos_id or len(out) >= caps[j]:
                finished[j] = True
        keep = ~finished
        if not keep.all():
            state = state.select_rows(keep)
            rows = rows[keep]
            caps = caps[keep]
            prev = tokens[keep]
        else:
            prev = tokens
    return outputs


# --- binary blob ------------------------------------------------------------
# Layout: magic "LMTW", version u32, tensor count u32, then tensors in the
# canonical order given by tensor_descriptors(). Quantized matrices use the
# tensor-module record layout; float vectors are u32 length + f32 data.
# Little-endian throughout.


def tensor_descriptors(cfg: ModelConfig):
    """Canonical (name, kind, shape) ordering of every tensor in the blob."""
    e, f = cfg.emb_dim, cfg.ffn_dim
    out = [("embeddings", "q", (cfg.vocab_size, e))]

    def attn(prefix: str):
        for part in ("q", "k", "v", "o"):
            out.append((f"{prefix}.w{part}", "q", (e, e)))
            out.append((f"{prefix}.b{part}", "v", (e,)))

    for i in range(cfg.enc_layers):
        p = f"enc.{i}"
        out.append((f"{p}.attn_ln.gain", "v", (e,)))
        out.append((f"{p}.attn_ln.bias", "v", (e,)))
        attn(f"{p}.attn")
        out.append((f"{p}.ffn_ln.gain", "v", (e,)))
        out.append((f"{p}.ffn_ln.bias", "v", (e,)))
        out.append((f"{p}.ffn.w1", "q", (e, f)))
        out.append((f"{p}.ffn.b1", "v", (f,)))
        out.append((f"{p}.ffn.w2", "q", (f, e)))
        out.append((f"{p}.ffn.b2", "v", (e,)))
    out.append(("enc.final_ln.gain", "v", (e,)))
    out.append(("enc.final_ln.bias", "v", (e,)))
    for i in range(cfg.dec_layers):
        p = f"dec.{i}"
        out.append((f"{p}.ssru_ln.gain", "v", (e,)))
        out.append((f"{p}.ssru_ln.bias", "v", (e,)))
        out.append((f"{p}.ssru.wf", "q", (e, e)))
        out.append((f"{p}.ssru.bf", "v", (e,)))
        out.append((f"{p}.ssru.wc", "q", (e, e)))
        out.append((f"{p}.xattn_ln.gain", "v", (e,)))
        out.append((f"{p}.xattn_ln.bias", "v", (e,)))
        attn(f"{p}.xattn")
        out.append((f"{p}.ffn_ln.gain", "v", (e,)))
        out.append((f"{p}.ffn_ln.bias", "v", (e,)))
        out.append((f"{p}.ffn.w1", "q", (e, f)))
        out.append((f"{p}.ffn.b1", "v", (f,)))
        out.append((f"{p}.ffn.w2", "q", (f, e)))
        out.append((f"{p}.ffn.b2", "v", (e,)))
    out.append(("dec.final_ln.gain", "v", (e,)))
    out.append(("dec.final_ln.bias", "v", (e,)))
    return out


def _flatten_tensors(model: Model) -> dict[str, QuantizedMatrix | np.ndarray]:
    t: dict[str, QuantizedMatrix | np.ndarray] = {"embeddings": model.embeddings}

    def attn(prefix: str, a: AttentionWeights):
        t[f"{prefix}.wq"], t[f"{prefix}.bq"] = a.wq, a.bq
        t[f"{prefix}.wk"], t[f"{prefix}.bk"] = a.wk, a.bk
        t[f"{prefix}.wv"], t[f"{prefix}.bv"] = a.wv, a.bv
        t[f"{prefix}.wo"], t[f"{prefix}.bo"] = a.wo, a.bo

    for i, l in enumerate(model.enc_layers):
        p = f"enc.{i}"
        t[f"{p}.attn_ln.gain"], t[f"{p}.attn_ln.bias"] = l.attn_ln_gain, l.attn_ln_bias
        attn(f"{p}.attn", l.attn)
        t[f"{p}.ffn_ln.gain"], t[f"{p}.ffn_ln.bias"] = l.ffn_ln_gain, l.ffn_ln_bias
        t[f"{p}.ffn.w1"], t[f"{p}.ffn.b1"] = l.ffn_w1, l.ffn_b1
        t[f"{p}.ffn.w2"], t[f"{p}.ffn.b2"] = l.ffn_w2, l.ffn_b2
    t["enc.final_ln.gain"], t["enc.final_ln.bias"] = model.enc_final_ln_gain, model.enc_final_ln_bias
    for i, l in enumerate(model.dec_layers):
        p = f"dec.{i}"
        t[f"{p}.ssru_ln.gain"], t[f"{p}.ssru_ln.bias"] = l.ssru_ln_gain, l.ssru_ln_bias
        t[f"{p}.ssru.wf"], t[f"{p}.ssru.bf"] = l.w_f, l.b_f
        t[f"{p}.ssru.wc"] = l.w_c
        t[f"{p}.xattn_ln.gain"], t[f"{p}.xattn_ln.bias"] = l.xattn_ln_gain, l.xattn_ln_bias
        attn(f"{p}.xattn", l.xattn)
        t[f"{p}.ffn_ln.gain"], t[f"{p}.ffn_ln.bias"] = l.ffn_ln_gain, l.ffn_ln_bias
        t[f"{p}.ffn.w1"], t[f"{p}.ffn.b1"] = l.ffn_w1, l.ffn_b1
        t[f"{p}.ffn.w2"], t[f"{p}.ffn.b2"] = l.ffn_w2, l.ffn_b2
    t["dec.final_ln.gain"], t["dec.final_ln.bias"] = model.dec_final_ln_gain, model.dec_final_ln_bias
    return t


def save_model(model: Model) -> bytes:
    tensors = _flatten_tensors(model)
    descriptors = tensor_descriptors(model.config)
    parts = [BLOB_MAGIC, struct.pack("<II", BLOB_VERSION, len(descriptors))]
    for name, kind, _shape in descriptors:
        value = tensors[name]
        if kind == "q":
            parts.append(matrix_to_bytes(value))
        else:
            vec = np.asarray(value, dtype="<f4")
            parts.append(struct.pack("<I", vec.shape[0]) + vec.tobytes())
    return b"".join(parts)


def load_model(blob: bytes, config: ModelConfig) -> Model:
    """Single-pass load of a weight blob against a declared configuration."""
    view = memoryview(blob)
    if len(view) < 12:
        raise TruncatedBlobError("blob shorter than its header")
    if bytes(view[:4]) != BLOB_MAGIC:
        raise ModelFormatError("bad magic; not a model blob")
    version, tensor_count = struct.unpack_from("<II", view, 4)
    if version != BLOB_VERSION:
        raise UnknownFormatVersionError(f"unsupported blob version {version}")
    descriptors = tensor_descriptors(config)
    if tensor_count != len(descriptors):
        raise ShapeMismatchError(
            f"blob declares {tensor_count} tensors, config expects {len(descriptors)}"
        )
    offset = 12
    tensors: dict[str, QuantizedMatrix | np.ndarray] = {}
    for name, kind, shape in descriptors:
        if kind == "q":
            try:
                mat, offset = matrix_from_bytes(view, offset)
            except TruncatedBlobError as exc:
                raise TruncatedBlobError(f"{exc} (while reading {name})") from exc
            if (mat.rows, mat.cols) != shape:
                raise ShapeMismatchError(
                    f"{name}: expected {shape}, blob has {(mat.rows, mat.cols)}"
                )
            tensors[name] = mat
        else:
            if offset + 4 > len(view):
                raise TruncatedBlobError(f"blob ended at {name} header")
            (n,) = struct.unpack_from("<I", view, offset)
            offset += 4
            if n != shape[0]:
                raise ShapeMismatchError(f"{name}: expected length {shape[0]}, blob has {n}")
            if offset + 4 * n > len(view):
                raise TruncatedBlobError(f"blob ended inside {name}")
            tensors[name] = np.frombuffer(view, dtype="<f4", count=n, offset=offset).astype(np.float32)
            offset += 4 * n
    if offset != len(view):
        raise ModelFormatError(f"{len(view) - offset} trailing bytes after last tensor")
    return _assemble(config, tensors)


def _assemble(cfg: ModelConfig, t: dict) -> Model:
    def attn(prefix: str) -> AttentionWeights:
        return AttentionWeights(
            wq=t[f"{prefix}.wq"], bq=t[f"{prefix}.bq"],
            wk=t[f"{prefix}.wk"], bk=t[f"{prefix}.bk"],
            wv=t[f"{prefix}.wv"], bv=t[f"{prefix}.bv"],
            wo=t[f"{prefix}.wo"], bo=t[f"{prefix}.bo"],
        )

    enc = [
        EncoderLayerWeights(
            attn_ln_gain=t[f"enc.{i}.attn_ln.gain"],
            attn_ln_bias=t[f"enc.{i}.attn_ln.bias"],
            attn=attn(f"enc.{i}.attn"),
            ffn_ln_gain=t[f"enc.{i}.ffn_ln.gain"],
            ffn_ln_bias=t[f"enc.{i}.ffn_ln.bias"],
            ffn_w1=t[f"enc.{i}.ffn.w1"],
            ffn_b1=t[f"enc.{i}.ffn.b1"],
            ffn_w2=t[f"enc.{i}.ffn.w2"],
            ffn_b2=t[f"enc.{i}.ffn.b2"],
        )
        for i in range(cfg.enc_layers)
    ]
    dec = [
        DecoderLayerWeights(
            ssru_ln_gain=t[f"dec.{i}.ssru_ln.gain"],
            ssru_ln_bias=t[f"dec.{i}.ssru_ln.bias"],
            w_f=t[f"dec.{i}.ssru.wf"],
            b_f=t[f"dec.{i}.ssru.bf"],
            w_c=t[f"dec.{i}.ssru.wc"],
            xattn_ln_gain=t[f"dec.{i}.xattn_ln.gain"],
            xattn_ln_bias=t[f"dec.{i}.xattn_ln.bias"],
            xattn=attn(f"dec.{i}.xattn"),
            ffn_ln_gain=t[f"dec.{i}.ffn_ln.gain"],
            ffn_ln_bias=t[f"dec.{i}.ffn_ln.bias"],
            ffn_w1=t[f"dec.{i}.ffn.w1"],
            ffn_b1=t[f"dec.{i}.ffn.b1"],
            ffn_w2=t[f"dec.{i}.ffn.w2"],
            ffn_b2=t[f"dec.{i}.ffn.b2"],
        )
        for i in range(cfg.dec_layers)
    ]
    return Model(
        config=cfg,
        embeddings=t["embeddings"],
        enc_layers=enc,
        dec_layers=dec,
        enc_final_ln_gain=t["enc.final_ln.gain"],
        enc_final_ln_bias=t["enc.final_ln.bias"],
        dec_final_ln_gain=t["dec.final_ln.gain"],
        dec_final_ln_bias=t["dec.final_ln.bias"],
    )


def init_random_model(cfg: ModelConfig, seed: int = 0) -> Model:
    """Fresh model with quantized random weights; deterministic per seed."""
    rng = np.random.default_rng(seed)

    def qmat(rows: int, cols: int, std: float) -> QuantizedMatrix:
        return quantize((rng.standard_normal((rows, cols)) * std).astype(np.float32))

    def vec(n: int, center: float = 0.0, spread: float = 0.05) -> np.ndarray:
        return (center + rng.standard_normal(n) * spread).astype(np.float32)

    e, f = cfg.emb_dim, cfg.ffn_dim
    proj_std = 1.0 / math.sqrt(e)

    def attn() -> AttentionWeights:
        return AttentionWeights(
            wq=qmat(e, e, proj_std), bq=vec(e),
            wk=qmat(e, e, proj_std), bk=vec(e),
            wv=qmat(e, e, proj_std), bv=vec(e),
            wo=qmat(e, e, proj_std), bo=vec(e),
        )

    enc = [
        EncoderLayerWeights(
            attn_ln_gain=vec(e, 1.0), attn_ln_bias=vec(e),
            attn=attn(),
            ffn_ln_gain=vec(e, 1.0), ffn_ln_bias=vec(e),
            ffn_w1=qmat(e, f, proj_std), ffn_b1=vec(f),
            ffn_w2=qmat(f, e, 1.0 / math.sqrt(f)), ffn_b2=vec(e),
        )
        for _ in range(cfg.enc_layers)
    ]
    dec = [
        DecoderLayerWeights(
            ssru_ln_gain=vec(e, 1.0), ssru_ln_bias=vec(e),
            w_f=qmat(e, e, proj_std), b_f=vec(e, 0.5, 0.2),
            w_c=qmat(e, e, proj_std),
            xattn_ln_gain=vec(e, 1.0), xattn_ln_bias=vec(e),
            xattn=attn(),
            ffn_ln_gain=vec(e, 1.0), ffn_ln_bias=vec(e),
            ffn_w1=qmat(e, f, proj_std), ffn_b1=vec(f),
            ffn_w2=qmat(f, e, 1.0 / math.sqrt(f)), ffn_b2=vec(e),
        )
        for _ in range(cfg.dec_layers)
    ]
    return Model(
        config=cfg,
        embeddings=qmat(cfg.vocab_size, e, 1.0),
        enc_layers=enc,
        dec_layers=dec,
        enc_final_ln_gain=vec(e, 1.0),
        enc_final_ln_bias=vec(e),
        dec_final_ln_gain=vec(e, 1.0),
        dec_final_ln_bias=vec(e),
    )
