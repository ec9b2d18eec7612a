"""Cross-attention duration prediction.

Phoneme embeddings query a fixed-length reference mel window taken from a
different utterance of the same speaker; the attended features feed a small
conv stack that regresses log frame counts per phoneme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .audio import MelSpectrogram
from .config import Config


class ReferenceUnavailableError(ValueError):
    """No unrelated reference material for a speaker."""


class InvalidTargetError(ValueError):
    """Duration targets must be strictly positive."""


@dataclass
class ReferenceMel:
    mel: MelSpectrogram
    source_utterance: str
    source_speaker: str

    def __post_init__(self):
        if self.mel.frames < 1:
            raise ValueError("reference mel needs at least one frame")


@dataclass
class DurationVector:
    frames: np.ndarray        # per-phoneme positive integers
    log_durations: np.ndarray  # pre-rounding real values

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.int64)
        if np.any(self.frames < 1):
            raise ValueError("every phoneme needs at least one frame")

    def total(self) -> int:
        return int(self.frames.sum())


# -- reference selection -----------------------------------------------------


def crop_window(values: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Random fixed-length window; shorter sources are tile-repeated first."""
    frames = values.shape[0]
    if frames < length:
        reps = -(-length // frames)  # ceil
        values = np.tile(values, (reps, 1))
        frames = values.shape[0]
    start = int(rng.integers(0, frames - length + 1))
    return values[start:start + length].copy()


def crop_reference(pool: dict[str, MelSpectrogram], target_id: str,
                   rng: np.random.Generator, length: int, speaker: str = "",
                   target_region: tuple[int, int] | None = None) -> ReferenceMel:
    """Pick an unrelated utterance of the speaker and crop a window from it.

    When the pool holds only the target itself, a window is cut from material
    outside the declared target region; with no such region (or none left)
    this fails.
    """
    if not pool:
        raise ReferenceUnavailableError("empty reference pool")
    others = sorted(uid for uid in pool if uid != target_id)
    if others:
        pick = others[int(rng.integers(0, len(others)))]
        source = pool[pick]
        window = crop_window(source.values, length, rng)
        return ReferenceMel(
            MelSpectrogram(window, source.sample_rate, source.hop_length, source.n_mels),
            pick, speaker)
    source = pool[target_id]
    if target_region is None:
        raise ReferenceUnavailableError(
            f"speaker {speaker or '?'}: only the target utterance is available")
    lo, hi = target_region
    segments = [seg for seg in (source.values[:lo], source.values[hi:]) if seg.shape[0] > 0]
    if not segments:
        raise ReferenceUnavailableError(
            f"speaker {speaker or '?'}: target region covers the whole utterance")
    seg = segments[int(rng.integers(0, len(segments)))]
    window = crop_window(seg, length, rng)
    return ReferenceMel(
        MelSpectrogram(window, source.sample_rate, source.hop_length, source.n_mels),
        target_id, speaker)


# -- parameters ---------------------------------------------------------------


def init_params(store: nc.ParamStore, cfg: Config, rng: np.random.Generator,
                prefix: str = "dur") -> None:
    d = cfg.model.d_model
    k = cfg.model.conv_kernel
    store.create(f"{prefix}.ref.w", nc.glorot(rng, cfg.audio.n_mels, d))
    store.create(f"{prefix}.ref.b", np.zeros(d))
    # small query init keeps early attention near-uniform, so the attended
    # output starts as a stable window average instead of arbitrary frames
    store.create(f"{prefix}.query.w", 0.1 * nc.glorot(rng, d, d))
    # block0 takes [attended reference | text embeddings] side by side
    store.create(f"{prefix}.block0.conv.w", nc.glorot(rng, k * 2 * d, d))
    store.create(f"{prefix}.block0.conv.b", np.zeros(d))
    store.create(f"{prefix}.block0.ln.gain", np.ones(d))
    store.create(f"{prefix}.block0.ln.bias", np.zeros(d))
    store.create(f"{prefix}.block1.conv.w", nc.glorot(rng, k * d, d))
    store.create(f"{prefix}.block1.conv.b", np.zeros(d))
    store.create(f"{prefix}.block1.ln.gain", np.ones(d))
    store.create(f"{prefix}.block1.ln.bias", np.zeros(d))
    store.create(f"{prefix}.head.w", nc.glorot(rng, d, 1))
    store.create(f"{prefix}.head.b", np.zeros(1))


# -- forward -------------------------------------------------------------------


def cross_attend(store: nc.ParamStore, text_emb: nc.Tensor, ref: ReferenceMel,
                 cfg: Config | None = None, mask: np.ndarray | None = None,
                 prefix: str = "dur") -> nc.Tensor:
    """Attend text queries over the projected reference frames.

    The reference serves as both keys and values after one learned linear
    projection to model width.  Single head by default; with several heads
    the projected queries/keys/values are split column-wise, scale stays
    1/sqrt(d_head).
    """
    heads = 1 if cfg is None else cfg.model.dur_heads
    m = nc.Tensor(ref.mel.values.astype(store.dtype))
    proj = nc.linear(m, store[f"{prefix}.ref.w"].tensor, store[f"{prefix}.ref.b"].tensor)
    q = text_emb @ store[f"{prefix}.query.w"].tensor
    if heads == 1:
        out, _ = nc.scaled_dot_attention(q, proj, proj)
    else:
        d_head = q.shape[1] // heads
        parts = []
        for h in range(heads):
            lo, hi = h * d_head, (h + 1) * d_head
            piece, _ = nc.scaled_dot_attention(
                nc.slice_cols(q, lo, hi), nc.slice_cols(proj, lo, hi), nc.slice_cols(proj, lo, hi))
            parts.append(piece)
        out = parts[0]
        for piece in parts[1:]:
            out = nc.concat_cols(out, piece)
    if mask is not None:
        out = nc.apply_mask(out, mask)
    return out


def predict_log_durations(store: nc.ParamStore, attended: nc.Tensor, text_emb: nc.Tensor,
                          cfg: Config, mask: np.ndarray | None = None,
                          prefix: str = "dur") -> nc.Tensor:
    """Two masked conv+norm blocks over [A | E_t], then a linear head.

    The text embeddings ride along in separate channels so the head can
    weight phoneme identity and reference prosody independently.
    """
    k = cfg.model.conv_kernel
    x = nc.concat_cols(attended, text_emb)
    for i in range(2):
        b = f"{prefix}.block{i}"
        x = nc.conv1d(x, store[f"{b}.conv.w"].tensor, store[f"{b}.conv.b"].tensor, kernel=k)
        x = nc.tanh(x)
        x = nc.layer_norm(x, store[f"{b}.ln.gain"].tensor, store[f"{b}.ln.bias"].tensor)
        if mask is not None:
            x = nc.apply_mask(x, mask)
    return nc.linear(x, store[f"{prefix}.head.w"].tensor, store[f"{prefix}.head.b"].tensor)


def durations_to_frames(log_d: np.ndarray) -> DurationVector:
    """Frame counts: max(1, round(exp(log_d))), rounding half away from zero."""
    log_d = np.asarray(log_d, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(log_d)):
        raise ValueError("log-durations must be finite")
    raw = np.exp(log_d)
    rounded = np.floor(raw + 0.5)  # raw > 0, so half away from zero == half up
    return DurationVector(np.maximum(rounded, 1.0).astype(np.int64), log_d)


def duration_loss(log_d_pred: nc.Tensor, true_frames: np.ndarray,
                  mask: np.ndarray) -> nc.Tensor:
    """Mean squared error in log-duration space over real positions."""
    true_frames = np.asarray(true_frames, dtype=np.float64)
    if np.any(true_frames[np.asarray(mask, dtype=bool)] <= 0):
        raise InvalidTargetError("zero-length duration target")
    target = np.zeros_like(true_frames, dtype=np.float64)
    good = np.asarray(mask, dtype=bool)
    target[good] = np.log(true_frames[good])
    target_t = nc.Tensor(target.reshape(-1, 1).astype(log_d_pred.data.dtype))
    diff = log_d_pred - target_t
    return nc.masked_mean(diff * diff, good)
