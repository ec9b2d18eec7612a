"""Run configuration: validated dataclasses plus the key=value file format."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from typing import Any

from .audio import AnalysisConfig


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 128
    n_enc_blocks: int = 4
    n_heads: int = 2
    dur_heads: int = 1
    conv_kernel: int = 3
    d_spk: int = 64
    dec_channels: int = 64
    ref_seconds: float = 2.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0 or self.d_model % self.dur_heads != 0:
            raise ConfigError("d_model must be divisible by the head counts")
        if self.dur_heads < 1:
            raise ConfigError("dur_heads must be positive")
        if self.conv_kernel % 2 == 0 or self.conv_kernel < 1:
            raise ConfigError("conv_kernel must be odd and positive")
        for name in ("d_model", "n_enc_blocks", "n_heads", "d_spk", "dec_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.ref_seconds <= 0:
            raise ConfigError("ref_seconds must be positive")


@dataclass(frozen=True)
class ScheduleConfig:
    beta0: float = 0.05
    beta1: float = 20.0
    t_min: float = 1e-3

    def __post_init__(self):
        if not (0 < self.beta0 < self.beta1):
            raise ConfigError("need 0 < beta0 < beta1")
        if not (0 < self.t_min < 1):
            raise ConfigError("t_min must lie in (0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0
    checkpoint_every: int = 50

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("bad training parameters")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be positive")


@dataclass(frozen=True)
class GuidanceDefaults:
    gamma: float = 1.0
    steps: int = 50
    temperature: float = 1.5

    def __post_init__(self):
        if self.gamma < 0 or self.steps < 1 or self.temperature <= 0:
            raise ConfigError("bad guidance parameters")


@dataclass(frozen=True)
class Config:
    audio: AnalysisConfig = field(default_factory=AnalysisConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    guidance: GuidanceDefaults = field(default_factory=GuidanceDefaults)
    token_mode: str = "characters"

    def __post_init__(self):
        if self.token_mode not in ("characters", "phonemes"):
            raise ConfigError(f"unknown token_mode {self.token_mode!r}")

    @property
    def ref_frames(self) -> int:
        """Reference window length in frames (2 s -> 172 at the defaults)."""
        return int(self.model.ref_seconds * self.audio.sample_rate / self.audio.hop_length + 0.5)

    def to_lines(self) -> list[str]:
        lines = []
        for section in ("audio", "model", "schedule", "train", "guidance"):
            obj = getattr(self, section)
            for f in fields(obj):
                lines.append(f"{section}.{f.name}={getattr(obj, f.name)}")
        lines.append(f"token_mode={self.token_mode}")
        return lines

    def fingerprint(self) -> bytes:
        return hashlib.sha256("\n".join(sorted(self.to_lines())).encode("utf-8")).digest()


_SECTIONS = {
    "audio": AnalysisConfig,
    "model": ModelConfig,
    "schedule": ScheduleConfig,
    "train": TrainConfig,
    "guidance": GuidanceDefaults,
}


def _parse_value(raw: str, kind: type) -> Any:
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {kind.__name__}") from exc
    return raw


def parse_config(text: str) -> Config:
    """Parse key=value lines; unknown keys are rejected."""
    by_section: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
    top: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key == "token_mode":
            top["token_mode"] = raw.strip()
            continue
        if "." not in key:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        section, name = key.split(".", 1)
        cls = _SECTIONS.get(section)
        if cls is None:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        known = {f.name: f.type for f in fields(cls)}
        if name not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = {f.name: type(getattr(cls(), f.name)) for f in fields(cls)}[name]
        by_section[section][name] = _parse_value(raw, kind)
    try:
        return Config(
            audio=AnalysisConfig(**by_section["audio"]),
            model=ModelConfig(**by_section["model"]),
            schedule=ScheduleConfig(**by_section["schedule"]),
            train=TrainConfig(**by_section["train"]),
            guidance=GuidanceDefaults(**by_section["guidance"]),
            **top,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> Config:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


def save_config(path, cfg: Config) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in cfg.to_lines():
            f.write(line + "\n")
