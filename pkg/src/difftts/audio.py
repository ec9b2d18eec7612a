"""Audio I/O, resampling, STFT/mel analysis, Griffin-Lim, corpus mel stats.

All analysis follows one AnalysisConfig (22.05 kHz, 1024-point FFT, hop 256,
80 mel bins by default).  Mel values are natural-log magnitudes floored at
log(1e-5).
"""

from __future__ import annotations

import hashlib
import math
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

LOG_FLOOR = 1e-5

MELSTATS_MAGIC = b"MELSTATS"
MELSTATS_VERSION = 1


class AudioFormatError(ValueError):
    """Unreadable or unsupported audio / stats file."""


class TooShortError(ValueError):
    """Input shorter than one FFT window."""


class ConfigMismatchError(ValueError):
    """Mel spectrograms analysed under different configs."""


@dataclass(frozen=True)
class AnalysisConfig:
    sample_rate: int = 22050
    n_fft: int = 1024
    hop_length: int = 256
    win_length: int = 1024
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0

    def __post_init__(self):
        if self.sample_rate <= 0 or self.n_fft <= 0 or self.hop_length <= 0:
            raise ValueError("analysis sizes must be positive")
        if self.win_length > self.n_fft:
            raise ValueError("win_length may not exceed n_fft")
        if not (0 <= self.fmin < self.fmax <= self.sample_rate / 2):
            raise ValueError("need 0 <= fmin < fmax <= Nyquist")

    def fingerprint(self) -> bytes:
        text = "|".join(
            f"{k}={getattr(self, k)!r}"
            for k in ("sample_rate", "n_fft", "hop_length", "win_length", "n_mels", "fmin", "fmax")
        )
        return hashlib.sha256(text.encode("utf-8")).digest()


@dataclass
class Waveform:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise AudioFormatError("empty waveform")

    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class MelSpectrogram:
    values: np.ndarray  # frames x n_mels, natural-log magnitudes
    sample_rate: int
    hop_length: int
    n_mels: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("mel values must be frames x n_mels with frames >= 1")
        if self.values.shape[1] != self.n_mels:
            raise ValueError("n_mels does not match value columns")

    @property
    def frames(self) -> int:
        return self.values.shape[0]


@dataclass
class MelStats:
    mean_frame: np.ndarray  # (n_mels,)
    frame_count: int
    fingerprint: bytes

    def __post_init__(self):
        self.mean_frame = np.asarray(self.mean_frame, dtype=np.float64)
        if self.frame_count <= 0:
            raise ValueError("frame_count must be positive")


# -- WAV I/O --------------------------------------------------------------


def load_wav(path) -> Waveform:
    """Read a 16-bit PCM mono RIFF/WAVE file, scaled to [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1:
                raise AudioFormatError(f"{path}: only mono supported")
            if w.getsampwidth() != 2:
                raise AudioFormatError(f"{path}: only 16-bit PCM supported")
            if w.getcomptype() != "NONE":
                raise AudioFormatError(f"{path}: compressed WAV not supported")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"{path}: malformed WAV ({exc or 'truncated header'})") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, rate)


def write_wav(path, w: Waveform) -> None:
    quant = np.rint(np.clip(w.samples, -1.0, 1.0) * 32768.0)
    quant = np.clip(quant, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(w.sample_rate)
        out.writeframes(quant.tobytes())


# -- resampling ------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resample(w: Waveform, target_rate: int, taps: int = 32) -> Waveform:
    """Windowed-sinc resampling to target_rate."""
    if target_rate <= 0 or w.sample_rate <= 0:
        raise ValueError("rates must be positive")
    if target_rate == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    ratio = target_rate / w.sample_rate
    out_len = _round_half_up(w.samples.size * ratio)
    # cutoff relative to the source Nyquist; downsampling narrows it
    fc = min(1.0, ratio)
    centers = np.arange(out_len) / ratio
    base = np.floor(centers).astype(np.int64)
    offsets = np.arange(-taps + 1, taps + 1)
    idx = base[:, None] + offsets[None, :]
    frac = idx - centers[:, None]
    kernel = fc * np.sinc(fc * frac) * (0.5 + 0.5 * np.cos(np.pi * np.clip(frac / taps, -1.0, 1.0)))
    padded = np.concatenate([np.zeros(taps), w.samples, np.zeros(taps + 1)])
    out = (padded[idx + taps] * kernel).sum(axis=1)
    return Waveform(out, target_rate)


# -- STFT / mel -------------------------------------------------------------


def _window(cfg: AnalysisConfig) -> np.ndarray:
    # periodic Hann, zero-padded to n_fft if win_length is shorter
    n = cfg.win_length
    win = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if n < cfg.n_fft:
        pad = (cfg.n_fft - n) // 2
        win = np.pad(win, (pad, cfg.n_fft - n - pad))
    return win


def frame_count(n_samples: int, hop_length: int) -> int:
    return 1 + n_samples // hop_length


def _stft_complex(samples: np.ndarray, cfg: AnalysisConfig) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    n_frames = frame_count(samples.size, cfg.hop_length)
    if samples.size < cfg.n_fft:  # reflect padding needs a full window
        samples = np.pad(samples, (0, cfg.n_fft - samples.size))
    half = cfg.n_fft // 2
    padded = np.pad(samples, (half, half), mode="reflect")
    starts = np.arange(n_frames) * cfg.hop_length
    frames = padded[starts[:, None] + np.arange(cfg.n_fft)[None, :]]
    return np.fft.rfft(frames * _window(cfg)[None, :], axis=1)


def stft_magnitude(samples: np.ndarray, cfg: AnalysisConfig) -> np.ndarray:
    """Centered STFT magnitudes, frames x (n_fft//2 + 1)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < cfg.n_fft:
        raise TooShortError(f"need at least {cfg.n_fft} samples, got {samples.size}")
    return np.abs(_stft_complex(samples, cfg))


def _istft(spec: np.ndarray, cfg: AnalysisConfig) -> np.ndarray:
    """Least-squares inverse STFT (windowed overlap-add / window-square sum)."""
    win = _window(cfg)
    frames = np.fft.irfft(spec, n=cfg.n_fft, axis=1) * win[None, :]
    n_frames = spec.shape[0]
    total = (n_frames - 1) * cfg.hop_length + cfg.n_fft
    out = np.zeros(total)
    norm = np.zeros(total)
    wsq = win * win
    for i in range(n_frames):
        s = i * cfg.hop_length
        out[s:s + cfg.n_fft] += frames[i]
        norm[s:s + cfg.n_fft] += wsq
    out = out / np.maximum(norm, 1e-10)
    half = cfg.n_fft // 2
    end = max(total - half, half + cfg.hop_length)  # never return empty audio
    return out[half:end]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: AnalysisConfig) -> np.ndarray:
    """Triangular HTK-spaced filters, shape (n_mels, n_fft//2 + 1)."""
    points = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    freqs = np.linspace(0.0, cfg.sample_rate / 2.0, cfg.n_fft // 2 + 1)
    fb = np.zeros((cfg.n_mels, freqs.size))
    for i in range(cfg.n_mels):
        lo, mid, hi = points[i], points[i + 1], points[i + 2]
        up = (freqs - lo) / (mid - lo)
        down = (hi - freqs) / (hi - mid)
        fb[i] = np.maximum(0.0, np.minimum(up, down))
    return fb


def filter_center_frequencies(cfg: AnalysisConfig) -> np.ndarray:
    points = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    return points[1:-1]


def wav_to_mel(w: Waveform, cfg: AnalysisConfig) -> MelSpectrogram:
    """Log-mel analysis; requires the waveform to match the config rate."""
    if w.sample_rate != cfg.sample_rate:
        raise ConfigMismatchError(
            f"waveform rate {w.sample_rate} != config rate {cfg.sample_rate}; resample first")
    mag = stft_magnitude(w.samples, cfg)
    mel = mag @ mel_filterbank(cfg).T
    values = np.log(np.maximum(mel, LOG_FLOOR))
    return MelSpectrogram(values, cfg.sample_rate, cfg.hop_length, cfg.n_mels)


# -- corpus statistics -------------------------------------------------------


def mean_mel(corpus: Sequence[MelSpectrogram], cfg: AnalysisConfig) -> MelStats:
    """Per-bin mean over every frame of every utterance.

    Cross-utterance accumulation uses exact summation, so the result is
    independent of corpus order.
    """
    if not corpus:
        raise ValueError("empty corpus")
    for m in corpus:
        if (m.sample_rate, m.hop_length, m.n_mels) != (cfg.sample_rate, cfg.hop_length, cfg.n_mels):
            raise ConfigMismatchError("mel spectrogram does not match the analysis config")
    n_mels = cfg.n_mels
    per_utt = [m.values.sum(axis=0) for m in corpus]
    totals = np.array([math.fsum(s[b] for s in per_utt) for b in range(n_mels)])
    frames = sum(m.frames for m in corpus)
    return MelStats(totals / frames, frames, cfg.fingerprint())


def broadcast_mean(stats: MelStats, frames: int, sample_rate: int = 22050,
                   hop_length: int = 256) -> MelSpectrogram:
    """Tile the mean frame over time; the unconditional decoder condition."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    values = np.tile(stats.mean_frame[None, :], (frames, 1))
    return MelSpectrogram(values, sample_rate, hop_length, stats.mean_frame.size)


def save_mel_stats(path, stats: MelStats) -> None:
    mean32 = stats.mean_frame.astype("<f4")
    with open(path, "wb") as f:
        f.write(MELSTATS_MAGIC)
        f.write(struct.pack("<II", MELSTATS_VERSION, mean32.size))
        f.write(struct.pack("<Q", stats.frame_count))
        f.write(stats.fingerprint)
        f.write(mean32.tobytes())


def load_mel_stats(path) -> MelStats:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MELSTATS_MAGIC:
        raise AudioFormatError(f"{path}: not a MELSTATS file")
    version, n_mels = struct.unpack_from("<II", blob, 8)
    if version != MELSTATS_VERSION:
        raise AudioFormatError(f"{path}: unsupported MELSTATS version {version}")
    (frame_count_,) = struct.unpack_from("<Q", blob, 16)
    fingerprint = blob[24:56]
    values = np.frombuffer(blob, dtype="<f4", count=n_mels, offset=56)
    return MelStats(values.astype(np.float64), frame_count_, fingerprint)


# -- Griffin-Lim ---------------------------------------------------------------


def _mel_to_linear_magnitude(m: MelSpectrogram, cfg: AnalysisConfig) -> np.ndarray:
    mel_mag = np.exp(m.values)
    fb = mel_filterbank(cfg)
    return np.maximum(mel_mag @ np.linalg.pinv(fb).T, 0.0)


def _gl_iterate(target: np.ndarray, cfg: AnalysisConfig, iterations: int, seed: int) -> np.ndarray:
    n_frames = target.shape[0]
    rng = np.random.default_rng(seed)
    phase = np.exp(2j * np.pi * rng.random(target.shape))
    x = _istft(target * phase, cfg)
    for _ in range(iterations - 1):
        spec = _stft_complex(x, cfg)[:n_frames]
        phase = spec / np.maximum(np.abs(spec), 1e-12)
        x = _istft(target * phase, cfg)
    return x


def griffin_lim(m: MelSpectrogram, cfg: AnalysisConfig, iterations: int = 32,
                seed: int = 0) -> Waveform:
    """Invert a log-mel spectrogram by mel pseudo-inverse + phase recovery."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    target = _mel_to_linear_magnitude(m, cfg)
    x = _gl_iterate(target, cfg, iterations, seed)
    peak = np.abs(x).max()
    if peak > 1.0:
        x = x / peak
    return Waveform(x, cfg.sample_rate)


def griffin_lim_error(m: MelSpectrogram, cfg: AnalysisConfig, iterations: int,
                      seed: int = 0) -> float:
    """Magnitude reconstruction error after the given iteration count."""
    target = _mel_to_linear_magnitude(m, cfg)
    x = _gl_iterate(target, cfg, iterations, seed)
    got = np.abs(_stft_complex(x, cfg))[:target.shape[0]]
    return float(np.linalg.norm(got - target))
