"""Speaker embeddings: a stats-pooling baseline embedder plus ingestion of
externally computed embeddings, and the SIM-O cosine score."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .audio import MelSpectrogram

SPKEMB_MAGIC = b"SPKEMB01"


class EmbeddingFormatError(ValueError):
    """Unreadable or degenerate embedding data."""


@dataclass
class SpeakerEmbedding:
    vector: np.ndarray  # unit L2 norm

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise EmbeddingFormatError("non-finite embedding values")
        norm = np.linalg.norm(self.vector)
        if abs(norm - 1.0) > 1e-6:
            raise EmbeddingFormatError(f"embedding norm {norm} is not 1")

    @property
    def dim(self) -> int:
        return self.vector.size


def init_params(store: nc.ParamStore, n_mels: int, d_spk: int,
                rng: np.random.Generator, prefix: str = "spk") -> None:
    store.create(f"{prefix}.w", nc.glorot(rng, 2 * n_mels, d_spk))
    store.create(f"{prefix}.b", np.zeros(d_spk))


def _pool_stats(mel: MelSpectrogram) -> np.ndarray:
    # order-invariant pooling: per-bin mean and std over time
    mean = mel.values.mean(axis=0)
    std = mel.values.std(axis=0)
    return np.concatenate([mean, std])


def embed_tensor(store: nc.ParamStore, mel: MelSpectrogram, prefix: str = "spk") -> nc.Tensor:
    """Differentiable embedding as a graph tensor (training path)."""
    stats = nc.Tensor(_pool_stats(mel).astype(store.dtype))
    w = store[f"{prefix}.w"].tensor
    b = store[f"{prefix}.b"].tensor
    raw = stats.reshape(1, -1) @ w + b
    return nc.l2_normalize(raw.reshape(-1))


def embed_baseline(store: nc.ParamStore, mel: MelSpectrogram, prefix: str = "spk") -> SpeakerEmbedding:
    """Stats pooling -> learned linear map -> unit normalization."""
    with nc.no_grad():
        vec = embed_tensor(store, mel, prefix).data
    return SpeakerEmbedding(vec.astype(np.float64))


def save_embedding(path, emb: SpeakerEmbedding) -> None:
    with open(path, "wb") as f:
        f.write(SPKEMB_MAGIC)
        f.write(struct.pack("<I", emb.dim))
        f.write(emb.vector.astype("<f4").tobytes())


def load_external_embedding(path) -> SpeakerEmbedding:
    """Read a stored vector and renormalize it."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != SPKEMB_MAGIC:
        raise EmbeddingFormatError(f"{path}: not a speaker embedding file")
    try:
        (dim,) = struct.unpack_from("<I", blob, 8)
        values = np.frombuffer(blob, dtype="<f4", count=dim, offset=12).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise EmbeddingFormatError(f"{path}: truncated file") from exc
    if not np.all(np.isfinite(values)):
        raise EmbeddingFormatError(f"{path}: non-finite values")
    norm = np.linalg.norm(values)
    if norm == 0.0:
        raise EmbeddingFormatError(f"{path}: zero vector")
    return SpeakerEmbedding(values / norm)


def normalize_vector(values: np.ndarray) -> SpeakerEmbedding:
    """L2-normalize a raw vector into a SpeakerEmbedding."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise EmbeddingFormatError("non-finite values")
    norm = np.linalg.norm(values)
    if norm == 0.0:
        raise EmbeddingFormatError("zero vector")
    return SpeakerEmbedding(values / norm)


def sim_o(a: SpeakerEmbedding, b: SpeakerEmbedding) -> float:
    """Cosine similarity; inputs are already unit norm."""
    if a.dim != b.dim:
        raise ValueError(f"embedding dims disagree: {a.dim} vs {b.dim}")
    return float(np.dot(a.vector, b.vector))
