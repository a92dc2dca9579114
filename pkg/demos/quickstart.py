"""End-to-end walkthrough of the library API at a reduced scale.

Samples a small training corpus from the packaged grammar, trains a few
LSTM replicas, scores the four stimulus designs, and prints condition
error rates plus the six directional contrasts.  Defaults run in well
under a minute on one core; expect noisier effects than the desk-scale
configuration (configs/small.cfg) produces.

    python3 demos/quickstart.py
    python3 demos/quickstart.py --train-n 12000 --replicas 5 --hidden 40
"""

from __future__ import annotations

import argparse
import time

from verbnum.cli import resolve_path
from verbnum.corpus import attractor_count, generate_corpus
from verbnum.evaluation import condition_stats, evaluate, evaluate_corpus
from verbnum.grammar import load_grammar
from verbnum.lexicon import build_vocabulary
from verbnum.reporting import directional_findings, format_summary
from verbnum.stimuli import (
    gen_exp1,
    gen_exp2,
    gen_exp2_reversed,
    gen_rc_length_probe,
    load_exp1_frames,
    load_exp2_frames,
    load_rc_probe_frames,
)
from verbnum.trainer import TrainConfig, error_rate, train_replica


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.split("\n", 1)[0])
    parser.add_argument("--train-n", type=int, default=6000,
                        help="training preambles (default 6000)")
    parser.add_argument("--val-n", type=int, default=1200,
                        help="validation preambles (default 1200)")
    parser.add_argument("--replicas", type=int, default=3,
                        help="ensemble size (default 3)")
    parser.add_argument("--hidden", type=int, default=24,
                        help="embedding and LSTM width (default 24)")
    parser.add_argument("--epochs", type=int, default=8,
                        help="max training epochs (default 8)")
    parser.add_argument("--bootstrap", type=int, default=2000,
                        help="bootstrap resamples (default 2000)")
    return parser.parse_args()


def main() -> None:
    args = parse_args()

    vocabulary = build_vocabulary(resolve_path("builtin:lexicon.tsv"), cutoff=500)
    grammar = load_grammar(resolve_path("builtin:train.grammar"), vocabulary)
    print(f"vocabulary: {vocabulary.size} entries; "
          f"grammar: {len(grammar.productions)} nonterminals")

    train = generate_corpus(grammar, args.train_n, seed=[42, 0],
                            terminal_weighting="zipf")
    val = generate_corpus(grammar, args.val_n, seed=[42, 1],
                          terminal_weighting="zipf")
    with_attractor = sum(1 for p in train if attractor_count(p, vocabulary) > 0)
    print(f"corpora: {len(train)} train / {len(val)} validation preambles; "
          f"{with_attractor / len(train):.1%} of training items contain an attractor")

    config = TrainConfig(
        dims=(vocabulary.size, args.hidden, args.hidden),
        batch_size=64,
        max_epochs=args.epochs,
        seeds=tuple(range(args.replicas)),
    )
    ensemble = []
    for seed in config.seeds:
        start = time.perf_counter()
        params, log = train_replica(train, val, config, seed)
        ensemble.append(params)
        print(f"replica {seed}: {len(log.epochs)} epochs, "
              f"validation error {error_rate(params, val):.4f} "
              f"({time.perf_counter() - start:.1f}s)")

    frames1 = load_exp1_frames(resolve_path("builtin:frames_exp1.tsv"))
    frames2 = load_exp2_frames(resolve_path("builtin:frames_exp2.tsv"))
    frames_rc = load_rc_probe_frames(resolve_path("builtin:frames_rcprobe.tsv"))
    sets = [
        gen_exp1(frames1, vocabulary),
        gen_exp2(frames2, vocabulary),
        gen_exp2_reversed(frames2, vocabulary),
        gen_rc_length_probe(frames_rc, vocabulary),
    ]

    records = []
    for sset in sets:
        records.extend(evaluate(ensemble, sset, vocabulary=vocabulary))
    print(f"\n{len(records)} evaluation records across {len(sets)} designs")

    exp1_records = [r for r in records if r.design == sets[0].design]
    print("\nmodifier x subject x local-noun error rates:")
    for stats in condition_stats(exp1_records, b_samples=args.bootstrap):
        print(f"  {stats.condition_key:45s} {stats.error_rate:.3f} "
              f"[{stats.ci_low:.3f}, {stats.ci_high:.3f}] (n={stats.n})")

    corpus_records = evaluate_corpus(ensemble, val, vocabulary)
    by_count: dict[int, list[bool]] = {}
    for rec in corpus_records:
        count = int(rec.condition.level("attractors"))
        by_count.setdefault(count, []).append(rec.is_error)
    print("\nheld-out error by attractor count:")
    for count in sorted(by_count):
        cell = by_count[count]
        print(f"  {count} attractors: {sum(cell) / len(cell):.3f} "
              f"(n={len(cell) // len(ensemble)} preambles)")

    print()
    print(format_summary(directional_findings(records, b_samples=args.bootstrap)))


if __name__ == "__main__":
    main()
