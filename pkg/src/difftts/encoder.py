"""Text encoder: embedding lookup plus masked conv/self-attention blocks.

Produces per-phoneme embeddings and a per-phoneme mel-mean prediction; the
mel means expand to frame rate through the length regulator to become the
aligned decoder condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .config import Config
from .textfront import PhonemeSequence


@dataclass
class TextEncoding:
    embeddings: nc.Tensor  # P x d_model, zero rows at padding
    mu: nc.Tensor          # P x n_mels, zero rows at padding
    mask: np.ndarray       # bool, True = real token


def init_params(store: nc.ParamStore, cfg: Config, vocab_size: int,
                rng: np.random.Generator, prefix: str = "enc") -> None:
    d = cfg.model.d_model
    k = cfg.model.conv_kernel
    store.create(f"{prefix}.emb", nc.normal_init(rng, (vocab_size, d), std=0.1))
    for i in range(cfg.model.n_enc_blocks):
        b = f"{prefix}.block{i}"
        store.create(f"{b}.ln1.gain", np.ones(d))
        store.create(f"{b}.ln1.bias", np.zeros(d))
        d_head = d // cfg.model.n_heads
        for h in range(cfg.model.n_heads):
            store.create(f"{b}.attn.q{h}", nc.glorot(rng, d, d_head))
            store.create(f"{b}.attn.k{h}", nc.glorot(rng, d, d_head))
            store.create(f"{b}.attn.v{h}", nc.glorot(rng, d, d_head))
        store.create(f"{b}.attn.out", nc.glorot(rng, d, d))
        store.create(f"{b}.ln2.gain", np.ones(d))
        store.create(f"{b}.ln2.bias", np.zeros(d))
        store.create(f"{b}.ff1.w", nc.glorot(rng, k * d, d))
        store.create(f"{b}.ff1.b", np.zeros(d))
        store.create(f"{b}.ff2.w", nc.glorot(rng, k * d, d))
        store.create(f"{b}.ff2.b", np.zeros(d))
    store.create(f"{prefix}.ln_out.gain", np.ones(d))
    store.create(f"{prefix}.ln_out.bias", np.zeros(d))
    store.create(f"{prefix}.mu.w", nc.glorot(rng, d, cfg.audio.n_mels))
    store.create(f"{prefix}.mu.b", np.zeros(cfg.audio.n_mels))


def encode(store: nc.ParamStore, seq: PhonemeSequence, cfg: Config,
           prefix: str = "enc") -> TextEncoding:
    """Run the block stack; padded positions stay exactly zero throughout."""
    emb = store[f"{prefix}.emb"].tensor
    if seq.ids.max() >= emb.shape[0]:
        raise nc.ShapeError("token id outside vocabulary range")
    mask = seq.mask
    k = cfg.model.conv_kernel
    x = nc.apply_mask(nc.embedding(emb, seq.ids), mask)
    for i in range(cfg.model.n_enc_blocks):
        b = f"{prefix}.block{i}"
        h = nc.layer_norm(x, store[f"{b}.ln1.gain"].tensor, store[f"{b}.ln1.bias"].tensor)
        h = nc.apply_mask(h, mask)
        heads = []
        for hd in range(cfg.model.n_heads):
            q = h @ store[f"{b}.attn.q{hd}"].tensor
            kk = h @ store[f"{b}.attn.k{hd}"].tensor
            v = h @ store[f"{b}.attn.v{hd}"].tensor
            out, _ = nc.scaled_dot_attention(q, kk, v, mask=mask)
            heads.append(out)
        a = heads[0]
        for extra in heads[1:]:
            a = nc.concat_cols(a, extra)
        x = nc.apply_mask(x + a @ store[f"{b}.attn.out"].tensor, mask)
        h = nc.layer_norm(x, store[f"{b}.ln2.gain"].tensor, store[f"{b}.ln2.bias"].tensor)
        h = nc.apply_mask(h, mask)
        h = nc.conv1d(h, store[f"{b}.ff1.w"].tensor, store[f"{b}.ff1.b"].tensor, kernel=k)
        h = nc.apply_mask(nc.tanh(h), mask)
        h = nc.conv1d(h, store[f"{b}.ff2.w"].tensor, store[f"{b}.ff2.b"].tensor, kernel=k)
        x = nc.apply_mask(x + h, mask)
    x = nc.layer_norm(x, store[f"{prefix}.ln_out.gain"].tensor, store[f"{prefix}.ln_out.bias"].tensor)
    x = nc.apply_mask(x, mask)
    mu = nc.linear(x, store[f"{prefix}.mu.w"].tensor, store[f"{prefix}.mu.b"].tensor)
    mu = nc.apply_mask(mu, mask)
    return TextEncoding(x, mu, mask)


def expand_mu(enc: TextEncoding, durations: np.ndarray) -> nc.Tensor:
    """Repeat each real phoneme's mel mean durations[p] times: frame-level mu.

    This is the aligned condition fed to the decoder; total frames equal the
    duration sum.
    """
    durations = np.asarray(durations, dtype=np.int64)
    n_real = int(enc.mask.sum())
    if durations.shape != (n_real,):
        raise nc.ShapeError(f"expected {n_real} durations, got {durations.shape}")
    if durations.sum() < 1:
        raise nc.ShapeError("expansion would produce zero frames")
    counts = np.zeros(enc.mask.size, dtype=np.int64)
    counts[enc.mask] = durations
    return nc.repeat_rows(enc.mu, counts)


def encoder_prior_loss(frame_mu: nc.Tensor, target: np.ndarray) -> nc.Tensor:
    """MSE between the expanded mel means and the target mel."""
    diff = frame_mu - nc.Tensor(np.asarray(target, dtype=frame_mu.data.dtype))
    return (diff * diff).mean()
