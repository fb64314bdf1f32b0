"""Assembly of runnable demo packages: random-weight models over the
byte-fallback vocabulary. Used by the example scripts and the test suite;
real packages would come from a training pipeline instead."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import ModelConfig, init_random_model, save_model
from .registry import ModelManifest, build_package_archive
from .shortlist import build as build_shortlist, serialize as serialize_shortlist
from .textops import byte_fallback_vocabulary


def demo_config(
    vocab_size: int = 259,
    emb_dim: int = 64,
    enc_layers: int = 2,
    dec_layers: int = 2,
    heads: int = 4,
    ffn_dim: int = 128,
    max_src_len: int = 64,
) -> ModelConfig:
    # 259 = three marker pieces + 256 byte-fallback pieces
    return ModelConfig(
        vocab_size=vocab_size,
        emb_dim=emb_dim,
        enc_layers=enc_layers,
        dec_layers=dec_layers,
        heads=heads,
        ffn_dim=ffn_dim,
        max_src_len=max_src_len,
        max_len_factor=1.5,
        eos_id=2,
        unk_id=1,
        pad_id=0,
    )


def build_demo_package(
    out_path: str | Path,
    model_id: str = "demo-en-xx",
    version: str = "1.0.0",
    seed: int = 0,
    config: ModelConfig | None = None,
    shortlist_f: int | None = None,
    shortlist_k: int = 8,
) -> str:
    """Write a complete installable package archive; returns its sha256.

    By default the shortlist covers the whole vocabulary (f = vocab_size),
    so decoding matches the unshortlisted model exactly.
    """
    config = config or demo_config()
    vocab = byte_fallback_vocabulary()
    if len(vocab) > config.vocab_size:
        raise ValueError("config vocab_size too small for the byte vocabulary")
    model = init_random_model(config, seed=seed)

    if shortlist_f is None:
        shortlist_f = config.vocab_size
    rng = np.random.default_rng(seed + 1)
    pair_count = min(2000, config.vocab_size * 8)
    sources = rng.integers(0, config.vocab_size, pair_count)
    targets = rng.integers(0, config.vocab_size, pair_count)
    weights = rng.integers(1, 100, pair_count)
    counts: dict[tuple[int, int], int] = {}
    for s, t, c in zip(sources, targets, weights):
        counts[(int(s), int(t))] = counts.get((int(s), int(t)), 0) + int(c)
    sl = build_shortlist(counts, f=shortlist_f, k=shortlist_k, vocab_size=config.vocab_size)

    manifest = ModelManifest(
        id=model_id,
        name=f"Demo model {model_id}",
        src_lang="en",
        trg_lang="xx",
        version=version,
        architecture=config,
        files={
            "weights": "model.bin",
            "vocab_src": "vocab.src.txt",
            "vocab_trg": "vocab.trg.txt",
            "shortlist": "shortlist.bin",
        },
        license="MIT",
    )
    vocab_text = "\n".join(vocab.pieces) + "\n"
    return build_package_archive(
        out_path,
        manifest,
        weights_blob=save_model(model),
        vocab_src_text=vocab_text,
        vocab_trg_text=vocab_text,
        shortlist_blob=serialize_shortlist(sl),
    )
