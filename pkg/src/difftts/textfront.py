"""Text tokenization: character-level by default, pre-phonemized as escape hatch."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PAD_ID = 0
UNK_ID = 1

MODES = ("characters", "phonemes")


class EmptyTextError(ValueError):
    """Text empty after normalization."""


class VocabularyError(ValueError):
    """Malformed vocabulary input or file."""


def _normalize(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip()


def _split(text: str, mode: str) -> list[str]:
    if mode not in MODES:
        raise ValueError(f"unknown tokenization mode: {mode!r}")
    if mode == "characters":
        return list(text)
    return text.split()


@dataclass
class Vocabulary:
    symbol_to_id: dict[str, int]

    def __post_init__(self):
        ids = sorted(self.symbol_to_id.values())
        if ids != list(range(2, 2 + len(ids))):
            raise VocabularyError("symbol ids must be contiguous starting at 2")

    def __len__(self) -> int:
        return len(self.symbol_to_id) + 2  # plus pad and unk

    def id_of(self, symbol: str) -> int:
        return self.symbol_to_id.get(symbol, UNK_ID)

    def symbols_in_id_order(self) -> list[str]:
        return [s for s, _ in sorted(self.symbol_to_id.items(), key=lambda kv: kv[1])]


@dataclass
class PhonemeSequence:
    ids: np.ndarray    # int64
    mask: np.ndarray   # bool, True = real token

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.ids.shape != self.mask.shape:
            raise ValueError("ids and mask must have equal length")
        if not self.mask.any():
            raise ValueError("sequence needs at least one real token")
        if np.any(self.ids[self.mask] == PAD_ID):
            raise ValueError("padding id among real tokens")

    def __len__(self) -> int:
        return self.ids.size


def build_vocab(transcripts: Iterable[str], mode: str = "characters") -> Vocabulary:
    """Deterministic vocabulary: symbols sorted lexicographically, ids from 2."""
    symbols: set[str] = set()
    empty = True
    for text in transcripts:
        empty = False
        symbols.update(_split(_normalize(text), mode))
    if empty:
        raise VocabularyError("empty corpus")
    return Vocabulary({s: i for i, s in enumerate(sorted(symbols), start=2)})


def encode_text(text: str, vocab: Vocabulary, mode: str = "characters") -> PhonemeSequence:
    normalized = _normalize(text)
    if not normalized:
        raise EmptyTextError("text is empty after normalization")
    tokens = _split(normalized, mode)
    ids = np.array([vocab.id_of(t) for t in tokens], dtype=np.int64)
    return PhonemeSequence(ids, np.ones(ids.size, dtype=bool))


def decode_ids(ids: Sequence[int], vocab: Vocabulary, mode: str = "characters") -> str:
    inv = {i: s for s, i in vocab.symbol_to_id.items()}
    symbols = [inv[i] for i in ids if i not in (PAD_ID, UNK_ID)]
    sep = "" if mode == "characters" else " "
    return sep.join(symbols)


def pad_batch(seqs: Sequence[PhonemeSequence]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad to the longest sequence with PAD_ID; masks mark real slots."""
    if not seqs:
        raise ValueError("need at least one sequence")
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    masks = np.zeros((len(seqs), width), dtype=bool)
    for r, s in enumerate(seqs):
        ids[r, :len(s)] = s.ids
        masks[r, :len(s)] = s.mask
    return ids, masks


def save_vocab(path, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for symbol, sid in sorted(vocab.symbol_to_id.items(), key=lambda kv: kv[1]):
            f.write(f"{symbol}\t{sid}\n")


def load_vocab(path) -> Vocabulary:
    mapping: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise VocabularyError(f"line {lineno}: expected symbol<TAB>id")
            try:
                mapping[parts[0]] = int(parts[1])
            except ValueError as exc:
                raise VocabularyError(f"line {lineno}: bad id {parts[1]!r}") from exc
    return Vocabulary(mapping)
