#!/usr/bin/env python3
"""Generate a synthetic training corpus of tone-sequence "speech".

Writes <id>.wav, <id>.txt and speakers.tsv into the target directory in the
layout the difftts CLI expects.
"""

import argparse

from difftts import toydata


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", help="corpus directory to create")
    ap.add_argument("--speakers", type=int, default=2)
    ap.add_argument("--utterances", type=int, default=4, help="per speaker")
    ap.add_argument("--seconds", type=float, default=5.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    ids = toydata.make_corpus(args.out_dir, n_speakers=args.speakers,
                              utts_per_speaker=args.utterances,
                              seconds=args.seconds, seed=args.seed)
    print(f"wrote {len(ids)} utterances to {args.out_dir}")


if __name__ == "__main__":
    main()
