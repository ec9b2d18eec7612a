"""End-to-end assembly: the full model, the training loop, and synthesis.

Randomness is stateless per step: every draw comes from a generator keyed by
(seed, purpose, counter), so a resumed run replays the exact stream of the
unbroken one.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import aligner, checkpoint, diffusion, durpred, encoder, speaker
from . import numcore as nc
from .audio import (LOG_FLOOR, MelSpectrogram, MelStats, Waveform, broadcast_mean,
                    griffin_lim, wav_to_mel)
from .config import Config
from .corpus import Utterance, require_reference_material, speaker_pools
from .durpred import DurationVector
from .textfront import PhonemeSequence, Vocabulary, encode_text

# rng stream tags
_INIT, _ORDER, _STEP, _CROP, _SAMPLE = range(5)


class TTSModel:
    """Parameter store plus config/vocab; everything forward passes need."""

    def __init__(self, cfg: Config, vocab: Vocabulary, seed: int = 0,
                 dtype=np.float32):
        self.cfg = cfg
        self.vocab = vocab
        self.store = nc.ParamStore(dtype=dtype)
        self.schedule = diffusion.NoiseSchedule(cfg.schedule.beta0, cfg.schedule.beta1)
        rng = np.random.default_rng([seed, _INIT])
        encoder.init_params(self.store, cfg, len(vocab), rng)
        durpred.init_params(self.store, cfg, rng)
        speaker.init_params(self.store, cfg.audio.n_mels, cfg.model.d_spk, rng)
        diffusion.init_params(self.store, cfg, rng)

    def encode_text(self, text: str) -> PhonemeSequence:
        return encode_text(text, self.vocab, self.cfg.token_mode)


@dataclass
class Trainer:
    model: TTSModel
    opt: nc.Adam
    step: int = 0
    epoch: int = 0
    seed: int = 0


def new_trainer(cfg: Config, vocab: Vocabulary,
                utterances: list[Utterance] | None = None) -> Trainer:
    model = TTSModel(cfg, vocab, seed=cfg.train.seed)
    if utterances:
        # start the duration head at the corpus average log frames-per-token;
        # the regression then only has to learn deviations from the mean rate
        frames = sum(u.mel.frames for u in utterances)
        tokens = sum(len(model.encode_text(u.text)) for u in utterances)
        model.store["dur.head.b"].tensor.data[:] = np.log(max(frames / tokens, 1.0))
    opt = nc.Adam(model.store, lr=cfg.train.learning_rate)
    return Trainer(model, opt, seed=cfg.train.seed)


def _utterance_losses(model: TTSModel, utt: Utterance, seq: PhonemeSequence,
                      pool: dict[str, MelSpectrogram], rng: np.random.Generator):
    cfg = model.cfg
    store = model.store
    enc = encoder.encode(store, seq, cfg)
    mel64 = utt.mel.values
    log_prior = aligner.gaussian_log_prior(enc.mu.data.astype(np.float64), mel64)
    align = aligner.mas(log_prior)
    frame_mu = encoder.expand_mu(enc, align.durations)
    l_enc = encoder.encoder_prior_loss(frame_mu, mel64.astype(store.dtype))
    ref = durpred.crop_reference(pool, utt.utterance_id, rng, model.cfg.ref_frames,
                                 speaker=utt.speaker)
    att = durpred.cross_attend(store, enc.embeddings, ref, cfg, mask=seq.mask)
    log_d = durpred.predict_log_durations(store, att, enc.embeddings, cfg, mask=seq.mask)
    l_dur = durpred.duration_loss(log_d, align.durations, seq.mask)
    e_s = speaker.embed_tensor(store, utt.mel)
    l_diff = diffusion.diffusion_loss(store, mel64.astype(store.dtype), frame_mu, e_s,
                                      rng, model.schedule, cfg, t_min=cfg.schedule.t_min)
    return l_enc, l_dur, l_diff


def train_epochs(trainer: Trainer, utterances: list[Utterance], n_epochs: int,
                 log_lines: list[str] | None = None,
                 checkpoint_path=None, stats_path: str = "") -> list[str]:
    """Run n_epochs more epochs; returns the per-epoch loss-log lines."""
    require_reference_material(utterances)
    model = trainer.model
    cfg = model.cfg
    pools = speaker_pools(utterances)
    seqs = [model.encode_text(u.text) for u in utterances]
    lines = log_lines if log_lines is not None else []
    n = len(utterances)
    batch_size = min(cfg.train.batch_size, n)
    last_epoch = trainer.epoch + n_epochs
    for _ in range(n_epochs):
        trainer.epoch += 1
        order = np.random.default_rng([trainer.seed, _ORDER, trainer.epoch]).permutation(n)
        sums = np.zeros(3)
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            trainer.step += 1
            rng = np.random.default_rng([trainer.seed, _STEP, trainer.step])
            total = None
            for idx in batch:
                l_enc, l_dur, l_diff = _utterance_losses(
                    model, utterances[idx], seqs[idx], pools[utterances[idx].speaker], rng)
                sums += (l_enc.item(), l_dur.item(), l_diff.item())
                utt_total = l_enc + l_dur + l_diff
                total = utt_total if total is None else total + utt_total
            loss = total * (1.0 / len(batch))
            model.store.zero_grads()
            loss.backward()
            trainer.opt.step()
        enc_m, dur_m, diff_m = (float(v) for v in sums / n)
        lines.append(f"{trainer.epoch},{enc_m!r},{dur_m!r},{diff_m!r},{enc_m + dur_m + diff_m!r}")
        if checkpoint_path is not None and (
                trainer.epoch % cfg.train.checkpoint_every == 0 or trainer.epoch == last_epoch):
            save_trainer(checkpoint_path, trainer, stats_path)
    return lines


# -- persistence ---------------------------------------------------------------


def _vocab_tensors(vocab: Vocabulary) -> dict[str, np.ndarray]:
    symbols = vocab.symbols_in_id_order()
    flat = "".join(symbols)
    lengths = np.array([len(s) for s in symbols], dtype=np.float32)
    return {
        "vocab.symbols": checkpoint.string_to_tensor(flat),
        "vocab.lengths": lengths,
    }


def _vocab_from_tensors(tensors: dict[str, np.ndarray]) -> Vocabulary:
    flat = checkpoint.tensor_to_string(tensors["vocab.symbols"])
    lengths = [int(v) for v in np.asarray(tensors["vocab.lengths"]).reshape(-1)]
    mapping = {}
    pos = 0
    for i, ln in enumerate(lengths):
        mapping[flat[pos:pos + ln]] = i + 2
        pos += ln
    return Vocabulary(mapping)


def save_trainer(path, trainer: Trainer, stats_path: str = "") -> None:
    model = trainer.model
    tensors: dict[str, np.ndarray] = {}
    for name, p in model.store.items():
        tensors[f"param.{name}"] = p.value
    for name in model.store.names():
        tensors[f"adam.m.{name}"] = trainer.opt.m[name]
        tensors[f"adam.v.{name}"] = trainer.opt.v[name]
    tensors["trainer.step"] = np.array([trainer.step], dtype=np.float32)
    tensors["trainer.epoch"] = np.array([trainer.epoch], dtype=np.float32)
    tensors["trainer.seed"] = np.array([trainer.seed], dtype=np.float32)
    tensors.update(_vocab_tensors(model.vocab))
    tensors["melstats.path"] = checkpoint.string_to_tensor(str(stats_path))
    tensors["config.text"] = checkpoint.string_to_tensor(
        "\n".join(model.cfg.to_lines()))
    checkpoint.save_checkpoint(path, model.cfg.fingerprint(), tensors)


def load_trainer(path, cfg: Config | None = None) -> tuple[Trainer, str]:
    """Rebuild a trainer from a checkpoint; returns it plus the stats path."""
    from .config import parse_config

    config_hash, tensors = checkpoint.load_checkpoint(path)
    stored_cfg = parse_config(checkpoint.tensor_to_string(tensors["config.text"]))
    if cfg is None:
        cfg = stored_cfg
    if cfg.fingerprint() != config_hash:
        raise checkpoint.CheckpointError(
            f"{path}: config fingerprint mismatch; the checkpoint was written "
            "with different settings")
    vocab = _vocab_from_tensors(tensors)
    seed = int(tensors["trainer.seed"][0])
    model = TTSModel(cfg, vocab, seed=seed)
    for name, p in model.store.items():
        key = f"param.{name}"
        if key not in tensors:
            raise checkpoint.CheckpointError(f"{path}: missing tensor {key}")
        if tensors[key].shape != p.value.shape:
            raise checkpoint.CheckpointError(f"{path}: shape mismatch for {key}")
        p.tensor.data = tensors[key].astype(model.store.dtype)
    opt = nc.Adam(model.store, lr=cfg.train.learning_rate)
    for name in model.store.names():
        opt.m[name] = tensors[f"adam.m.{name}"].astype(model.store.dtype)
        opt.v[name] = tensors[f"adam.v.{name}"].astype(model.store.dtype)
    trainer = Trainer(model, opt, step=int(tensors["trainer.step"][0]),
                      epoch=int(tensors["trainer.epoch"][0]), seed=seed)
    trainer.opt.t = trainer.step
    stats_path = checkpoint.tensor_to_string(tensors["melstats.path"])
    return trainer, stats_path


# -- synthesis -------------------------------------------------------------------


@dataclass
class SynthesisResult:
    mel: MelSpectrogram
    durations: DurationVector
    wave: Waveform


def synthesize(model: TTSModel, stats: MelStats, text: str, reference: Waveform,
               gamma: float, steps: int, seed: int, temperature: float | None = None,
               gl_iterations: int = 32) -> SynthesisResult:
    """Text + one reference recording -> mel -> waveform."""
    cfg = model.cfg
    store = model.store
    if reference.sample_rate != cfg.audio.sample_rate:
        from .audio import resample
        reference = resample(reference, cfg.audio.sample_rate)
    ref_mel = wav_to_mel(reference, cfg.audio)
    seq = model.encode_text(text)
    temp = cfg.guidance.temperature if temperature is None else temperature
    guide = diffusion.GuidanceConfig(gamma=gamma, steps=steps, temperature=temp)

    with nc.no_grad():
        enc = encoder.encode(store, seq, cfg)
        crop_rng = np.random.default_rng([seed, _CROP])
        window = durpred.crop_window(ref_mel.values, cfg.ref_frames, crop_rng)
        ref = durpred.ReferenceMel(
            MelSpectrogram(window, ref_mel.sample_rate, ref_mel.hop_length, ref_mel.n_mels),
            "reference", "reference")
        att = durpred.cross_attend(store, enc.embeddings, ref, cfg, mask=seq.mask)
        log_d = durpred.predict_log_durations(store, att, enc.embeddings, cfg, mask=seq.mask)
        durations = durpred.durations_to_frames(log_d.data[seq.mask])
        frame_mu = encoder.expand_mu(enc, durations.frames).data
    e_s = speaker.embed_baseline(store, ref_mel)
    c_mel = broadcast_mean(stats, frame_mu.shape[0], cfg.audio.sample_rate,
                           cfg.audio.hop_length).values
    mel_values = diffusion.reverse_sample(
        store, frame_mu, e_s.vector, guide, model.schedule, cfg,
        seed=[seed, _SAMPLE], cond_mel=c_mel, t_min=cfg.schedule.t_min)
    # a weakly trained score lets the reverse dynamics wander; clamp into the
    # valid log-magnitude range before inverting to audio
    mel_values = np.clip(mel_values.astype(np.float64), np.log(LOG_FLOOR), 20.0)
    mel = MelSpectrogram(mel_values, cfg.audio.sample_rate,
                         cfg.audio.hop_length, cfg.audio.n_mels)
    wave = griffin_lim(mel, cfg.audio, iterations=gl_iterations, seed=seed)
    return SynthesisResult(mel, durations, wave)
