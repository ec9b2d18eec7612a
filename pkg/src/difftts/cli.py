"""Command-line entry point: stats | train | synth | eval."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import evalkit, pipeline
from .audio import load_mel_stats, load_wav, mean_mel, save_mel_stats, write_wav
from .config import Config, load_config
from .corpus import load_corpus
from .textfront import build_vocab


def _config_from_args(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    return cfg


def _default_stats_path(corpus_dir) -> Path:
    return Path(corpus_dir) / "melstats.bin"


def cmd_stats(args) -> int:
    cfg = _config_from_args(args)
    utterances = load_corpus(args.corpus, cfg)
    stats = mean_mel([u.mel for u in utterances], cfg.audio)
    out = Path(args.out) if args.out else _default_stats_path(args.corpus)
    save_mel_stats(out, stats)
    print(f"wrote {out}: {stats.frame_count} frames over {len(utterances)} utterances")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    utterances = load_corpus(args.corpus, cfg)
    stats_path = Path(args.stats) if args.stats else _default_stats_path(args.corpus)
    if not stats_path.exists():
        stats = mean_mel([u.mel for u in utterances], cfg.audio)
        save_mel_stats(stats_path, stats)
        print(f"computed mel stats -> {stats_path}")
    if args.resume:
        trainer, _ = pipeline.load_trainer(args.resume, cfg)
    else:
        vocab = build_vocab([u.text for u in utterances], cfg.token_mode)
        trainer = pipeline.new_trainer(cfg, vocab)
    epochs = args.epochs if args.epochs is not None else cfg.train.epochs
    log_path = Path(args.log) if args.log else Path(args.out).with_suffix(".losses.csv")
    lines = pipeline.train_epochs(trainer, utterances, epochs,
                                  checkpoint_path=args.out, stats_path=str(stats_path))
    mode = "a" if args.resume else "w"
    with open(log_path, mode, encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
    pipeline.save_trainer(args.out, trainer, str(stats_path))
    print(f"trained {epochs} epochs -> {args.out} (loss log: {log_path})")
    return 0


def cmd_synth(args) -> int:
    trainer, stats_ref = pipeline.load_trainer(args.checkpoint,
                                               load_config(args.config) if args.config else None)
    stats_path = Path(args.stats) if args.stats else Path(stats_ref) if stats_ref else None
    if stats_path is None or not stats_path.exists():
        print(f"error: mel stats file {stats_path} not found; run `difftts stats` "
              "over the training corpus first", file=sys.stderr)
        return 1
    stats = load_mel_stats(stats_path)
    reference = load_wav(args.ref)
    result = pipeline.synthesize(trainer.model, stats, args.text, reference,
                                 gamma=args.gamma, steps=args.steps, seed=args.seed or 0)
    write_wav(args.out, result.wave)
    frames = result.durations.frames
    print("durations:", " ".join(str(int(d)) for d in frames))
    print(f"wrote {args.out}: {frames.sum()} frames, {result.wave.duration():.2f} s")
    return 0


def cmd_eval(args) -> int:
    records = evalkit.read_manifest(args.manifest)
    table = evalkit.aggregate(records, args.mode)
    text = evalkit.render_table(table, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if table.skipped:
        print(f"warning: skipped {table.skipped} records without {table.label} data",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="difftts",
                                     description="speaker-conditioned diffusion TTS")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="compute the dataset-mean mel statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train on a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--stats", help="mel stats file (computed if absent)")
    p.add_argument("--log", help="loss log path")
    p.add_argument("--epochs", type=int, help="override config epoch count")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="synthesize speech from text + reference audio")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--ref", required=True, help="reference WAV of the target speaker")
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--config")
    p.add_argument("--gamma", type=float, default=1.0,
                   help="guidance scale (no published operating value; 0 disables)")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats", help="override the checkpoint's stats reference")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score a manifest and render the table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=("cer", "wer", "simo"), required=True)
    p.add_argument("--format", choices=("tsv", "markdown"), default="tsv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface errors as exit code + message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
