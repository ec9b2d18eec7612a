"""Corpus layout: a flat directory of <id>.wav + <id>.txt plus speakers.tsv."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AnalysisConfig, MelSpectrogram, Waveform, load_wav, resample, wav_to_mel
from .config import Config
from .textfront import PhonemeSequence, Vocabulary, encode_text


class CorpusError(ValueError):
    """Missing or inconsistent corpus files; message names the culprit."""


@dataclass
class Utterance:
    utterance_id: str
    speaker: str
    text: str
    mel: MelSpectrogram


def read_speaker_map(path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read speaker map {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusError(f"{path} line {lineno}: expected id<TAB>speaker")
        mapping[parts[0]] = parts[1]
    if not mapping:
        raise CorpusError(f"{path}: no speaker entries")
    return mapping


def load_corpus(corpus_dir, cfg: Config) -> list[Utterance]:
    """Read, resample, and mel-analyse every utterance listed in speakers.tsv."""
    root = Path(corpus_dir)
    speakers = read_speaker_map(root / "speakers.tsv")
    utterances: list[Utterance] = []
    for uid in sorted(speakers):
        wav_path = root / f"{uid}.wav"
        txt_path = root / f"{uid}.txt"
        if not wav_path.exists():
            raise CorpusError(f"missing audio file {wav_path}")
        if not txt_path.exists():
            raise CorpusError(f"missing transcript {txt_path}")
        wave = load_wav(wav_path)
        if wave.sample_rate != cfg.audio.sample_rate:
            wave = resample(wave, cfg.audio.sample_rate)
        text = txt_path.read_text(encoding="utf-8").strip()
        if not text:
            raise CorpusError(f"empty transcript {txt_path}")
        utterances.append(Utterance(uid, speakers[uid], text, wav_to_mel(wave, cfg.audio)))
    return utterances


def speaker_pools(utterances: list[Utterance]) -> dict[str, dict[str, MelSpectrogram]]:
    """speaker -> {utterance id -> mel}, the reference-selection pools."""
    pools: dict[str, dict[str, MelSpectrogram]] = {}
    for utt in utterances:
        pools.setdefault(utt.speaker, {})[utt.utterance_id] = utt.mel
    return pools


def require_reference_material(utterances: list[Utterance]) -> None:
    """Training needs an unrelated reference, so two utterances per speaker."""
    counts: dict[str, int] = {}
    for utt in utterances:
        counts[utt.speaker] = counts.get(utt.speaker, 0) + 1
    starved = sorted(s for s, n in counts.items() if n < 2)
    if starved:
        from .durpred import ReferenceUnavailableError
        raise ReferenceUnavailableError(
            "speakers with a single utterance and no disjoint region: " + ", ".join(starved))
