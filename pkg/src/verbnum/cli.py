"""Command-line pipeline: gen-corpus, train, gen-stimuli, evaluate, report.

Every command writes its primary artifacts plus a JSON run manifest holding
the config snapshot, seeds, sha256 digests of all inputs and outputs, and the
tool version, so any stage can be re-run and verified byte for byte.  All
randomness flows from explicit seeds; nothing reads the clock or OS entropy.

Paths starting with ``builtin:`` resolve to files shipped inside the package
(for example ``builtin:configs/small.cfg`` or ``builtin:frames_exp1.tsv``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

from . import __version__
from .corpus import generate_corpus, load_preambles, save_preambles
from .evaluation import (
    B_DEFAULT,
    SEED_DEFAULT,
    EvalError,
    attractor_curve,
    condition_stats,
    evaluate,
    evaluate_corpus,
    save_curve,
    save_records,
    save_stats,
)
from .grammar import load_grammar
from .lexicon import build_vocabulary, load_lexicon
from .network import load_checkpoint, save_checkpoint
from .reporting import REPORT_INPUTS, ReportError, render_report
from .stimuli import (
    DESIGN_EXP1,
    DESIGN_EXP2,
    DESIGN_EXP2_REVERSED,
    DESIGN_RC_PROBE,
    StimulusError,
    StimulusSet,
    condition_labels,
    gen_exp1,
    gen_exp2,
    gen_exp2_reversed,
    gen_rc_length_probe,
    load_exp1_frames,
    load_exp2_frames,
    load_rc_probe_frames,
    load_stimuli,
    save_stimuli,
)
from .trainer import (
    TrainError,
    config_seeds,
    error_rate,
    parse_config,
    train_config_from,
    train_replica,
)

BUILTIN_PREFIX = "builtin:"

DESIGN_SLUGS = {
    "exp1": (DESIGN_EXP1, load_exp1_frames, gen_exp1, "frames_exp1.tsv"),
    "exp2": (DESIGN_EXP2, load_exp2_frames, gen_exp2, "frames_exp2.tsv"),
    "exp2rev": (DESIGN_EXP2_REVERSED, load_exp2_frames, gen_exp2_reversed, "frames_exp2.tsv"),
    "rcprobe": (DESIGN_RC_PROBE, load_rc_probe_frames, gen_rc_length_probe, "frames_rcprobe.tsv"),
}

SLUG_OF_DESIGN = {design: slug for slug, (design, _, _, _) in DESIGN_SLUGS.items()}


class CliError(ValueError):
    """User-facing command failure; its message is the exit diagnostic."""


def resolve_path(path: str) -> Path:
    """Resolve a user path, mapping the builtin: scheme to packaged data."""
    if path.startswith(BUILTIN_PREFIX):
        rel = path[len(BUILTIN_PREFIX):]
        target = Path(str(resources.files("verbnum") / "data")) / rel
        if not target.exists():
            raise CliError(f"no builtin data file named {rel!r}")
        return target
    return Path(path)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(
    path: Path,
    command: str,
    arguments: dict,
    config: dict[str, str] | None,
    seed: list[int] | None,
    inputs: dict[str, Path],
    outputs: list[Path],
) -> None:
    doc = {
        "tool": f"verbnum/{__version__}",
        "command": command,
        "arguments": arguments,
        "config": config,
        "seed": seed,
        "inputs": {name: _sha256(p) for name, p in inputs.items()},
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_setup(config_path: str):
    """Parse a config file and build the vocabulary and grammar it names."""
    cfg_file = resolve_path(config_path)
    mapping = parse_config(cfg_file.read_text(encoding="utf-8"))
    for key in ("lexicon", "grammar"):
        if key not in mapping:
            raise CliError(f"config {config_path}: missing required key {key!r}")
    lex_file = resolve_path(mapping["lexicon"])
    grm_file = resolve_path(mapping["grammar"])
    vocabulary = build_vocabulary(load_lexicon(lex_file), int(mapping.get("cutoff", "50000")))
    spec = load_grammar(grm_file, vocabulary)
    inputs = {config_path: cfg_file, mapping["lexicon"]: lex_file, mapping["grammar"]: grm_file}
    return mapping, vocabulary, spec, inputs


def _seed_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be comma-separated integers, got {text!r}")


# -- subcommands ----------------------------------------------------------------

def cmd_gen_corpus(args: argparse.Namespace) -> int:
    mapping, vocabulary, spec, inputs = _load_setup(args.config)
    n = args.n if args.n is not None else int(mapping.get("train_n", "50000"))
    if n < 0:
        raise CliError(f"cannot generate {n} preambles")
    seed = args.seed if args.seed is not None else [0]
    weighting = mapping.get("terminal_weighting", "uniform")
    max_depth = int(mapping.get("max_depth", "20"))
    max_tokens = int(mapping.get("max_tokens", "40"))

    excluded = set()
    if args.exclude is not None:
        exclude_file = resolve_path(args.exclude)
        excluded = set(load_preambles(exclude_file, vocabulary))
        inputs[args.exclude] = exclude_file

    preambles = []
    round_index = 0
    while len(preambles) < n:
        want = n - len(preambles)
        batch = generate_corpus(
            spec, want,
            seed=list(seed) + [round_index],
            max_depth=max_depth, max_tokens=max_tokens,
            terminal_weighting=weighting,
        )
        kept = [p for p in batch if p not in excluded]
        if not kept and round_index > 50:
            raise CliError("exclusion set rejects every sampled preamble")
        preambles.extend(kept[:want])
        round_index += 1

    out = Path(args.out)
    save_preambles(out, preambles, vocabulary)
    _write_manifest(
        Path(str(out) + ".manifest.json"), "gen-corpus",
        {"n": n, "exclude": args.exclude, "out": str(out)},
        mapping, seed, inputs, [out],
    )
    print(f"wrote {len(preambles)} preambles to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    mapping, vocabulary, _, inputs = _load_setup(args.config)
    corpus_file = resolve_path(args.corpus)
    val_file = resolve_path(args.validation)
    corpus = load_preambles(corpus_file, vocabulary)
    validation = load_preambles(val_file, vocabulary)
    inputs[args.corpus] = corpus_file
    inputs[args.validation] = val_file

    config = train_config_from(mapping, vocabulary.size)
    if args.seed is not None:
        config = replace(config, seeds=tuple(args.seed))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcomes: dict[int, tuple] = {}
    failures: list[tuple[int, str]] = []
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            jobs = {
                seed: pool.submit(train_replica, corpus, validation, config, seed)
                for seed in config.seeds
            }
            for seed, job in jobs.items():
                try:
                    outcomes[seed] = job.result()
                except Exception as exc:  # noqa: BLE001 - reported per seed below
                    failures.append((seed, str(exc)))
    else:
        for seed in config.seeds:
            try:
                outcomes[seed] = train_replica(corpus, validation, config, seed)
            except Exception as exc:  # noqa: BLE001 - reported per seed below
                failures.append((seed, str(exc)))

    artifacts = []
    for seed in config.seeds:
        if seed not in outcomes:
            continue
        params, log = outcomes[seed]
        ckpt = out_dir / f"seed{seed}.ckpt"
        save_checkpoint(ckpt, params, seed=seed)
        log_path = out_dir / f"seed{seed}.log"
        log_path.write_text(log.to_text(), encoding="utf-8")
        artifacts.extend([ckpt, log_path])
        print(f"seed {seed}: {len(log.epochs)} epochs, "
              f"best validation error {error_rate(params, validation):.4f}")
    _write_manifest(
        out_dir / "ensemble.manifest.json", "train",
        {"corpus": args.corpus, "validation": args.validation,
         "out": str(out_dir), "threads": args.threads},
        mapping, list(config.seeds), inputs, artifacts,
    )
    for seed, message in failures:
        print(f"error: seed {seed} failed: {message}", file=sys.stderr)
    return 1 if failures else 0


def cmd_gen_stimuli(args: argparse.Namespace) -> int:
    mapping, vocabulary, _, inputs = _load_setup(args.config)
    design, load_frames, build, default_frames = DESIGN_SLUGS[args.design]
    frames_arg = args.frames if args.frames is not None else BUILTIN_PREFIX + default_frames
    frames_file = resolve_path(frames_arg)
    frames = load_frames(frames_file)
    inputs[frames_arg] = frames_file

    stimuli = []
    problems = []
    for frame in frames:
        try:
            stimuli.extend(build([frame], vocabulary).stimuli)
        except StimulusError as exc:
            problems.append(str(exc))
    if problems:
        for message in problems:
            print(f"error: {message}", file=sys.stderr)
        return 1

    out = Path(args.out)
    save_stimuli(out, StimulusSet(design, tuple(stimuli)), vocabulary)
    _write_manifest(
        Path(str(out) + ".manifest.json"), "gen-stimuli",
        {"design": args.design, "frames": frames_arg, "out": str(out)},
        mapping, args.seed, inputs, [out],
    )
    print(f"wrote {len(stimuli)} stimuli ({design}) to {out}")
    return 0


def _load_ensemble(ensemble_dir: Path):
    """Checkpoints named seed<k>.ckpt, ordered by seed."""
    found = []
    for path in ensemble_dir.glob("seed*.ckpt"):
        stem = path.stem[len("seed"):]
        if stem.isdigit():
            found.append((int(stem), path))
    if not found:
        raise CliError(f"no seed<k>.ckpt checkpoints in {ensemble_dir}")
    found.sort()
    ensemble = []
    seeds = []
    for seed, path in found:
        params, _ = load_checkpoint(path)
        ensemble.append(params)
        seeds.append(seed)
    return ensemble, seeds, [path for _, path in found]


def cmd_evaluate(args: argparse.Namespace) -> int:
    mapping, vocabulary, _, inputs = _load_setup(args.config)
    ensemble_dir = Path(args.ensemble)
    ensemble, seeds, ckpt_paths = _load_ensemble(ensemble_dir)
    for path in ckpt_paths:
        inputs[str(path)] = path
    b_samples = int(mapping.get("bootstrap_samples", str(B_DEFAULT)))
    boot_seed = args.seed[0] if args.seed else SEED_DEFAULT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.mode == "conditions":
        if args.stimuli is None:
            raise CliError("conditions mode requires --stimuli")
        stim_file = resolve_path(args.stimuli)
        stimulus_set = load_stimuli(stim_file, vocabulary)
        inputs[args.stimuli] = stim_file
        records = evaluate(ensemble, stimulus_set, seeds=seeds, vocabulary=vocabulary)
        stats = condition_stats(
            records, expected=condition_labels(stimulus_set.design),
            b_samples=b_samples, seed=boot_seed,
        )
        slug = SLUG_OF_DESIGN[stimulus_set.design]
        rec_path = out_dir / f"{slug}_records.tsv"
        stats_path = out_dir / f"{slug}_stats.tsv"
        save_records(rec_path, records)
        save_stats(stats_path, stats)
        artifacts = [rec_path, stats_path]
        manifest_name = f"{slug}.manifest.json"
        print(f"wrote {len(records)} records, {len(stats)} condition stats to {out_dir}")
    else:
        if args.corpus is None:
            raise CliError("curve mode requires --corpus")
        corpus_file = resolve_path(args.corpus)
        corpus = load_preambles(corpus_file, vocabulary)
        inputs[args.corpus] = corpus_file
        records = evaluate_corpus(ensemble, corpus, vocabulary, seeds=seeds)
        curve = attractor_curve(
            ensemble, corpus, vocabulary,
            min_n=int(mapping.get("curve_min_n", "10")), seeds=seeds,
        )
        rec_path = out_dir / "corpus_records.tsv"
        curve_path = out_dir / "curve.tsv"
        save_records(rec_path, records)
        save_curve(curve_path, curve)
        artifacts = [rec_path, curve_path]
        manifest_name = "curve.manifest.json"
        print(f"wrote {len(records)} records and the attractor curve to {out_dir}")

    _write_manifest(
        out_dir / manifest_name, "evaluate",
        {"ensemble": args.ensemble, "mode": args.mode, "stimuli": args.stimuli,
         "corpus": args.corpus, "out": str(out_dir)},
        mapping, seeds, inputs, artifacts,
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    b_samples = B_DEFAULT
    config = None
    inputs: dict[str, Path] = {}
    if args.config is not None:
        cfg_file = resolve_path(args.config)
        config = parse_config(cfg_file.read_text(encoding="utf-8"))
        b_samples = int(config.get("bootstrap_samples", str(B_DEFAULT)))
        inputs[args.config] = cfg_file
    seed = args.seed[0] if args.seed else SEED_DEFAULT
    stats_dir = Path(args.stats)
    for name in REPORT_INPUTS.values():
        if (stats_dir / name).exists():
            inputs[str(stats_dir / name)] = stats_dir / name
    artifacts = render_report(stats_dir, Path(args.out), b_samples=b_samples, seed=seed)
    _write_manifest(
        Path(args.out) / "report.manifest.json", "report",
        {"stats": args.stats, "out": args.out},
        config, args.seed, inputs, artifacts,
    )
    print(f"wrote {len(artifacts)} report artifacts to {args.out}")
    return 0


# -- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="verbnum",
        description="Train and probe LSTM number-agreement classifiers "
                    "on synthetic preambles.",
    )
    parser.add_argument("--version", action="version", version=f"verbnum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (key = value lines; builtin: allowed)")
    common.add_argument("--seed", type=_seed_list, default=None,
                        help="comma-separated integer seed path")
    common.add_argument("--threads", type=int, default=1, help="worker process cap")
    common.add_argument("--out", required=True, help="output file or directory")

    p = sub.add_parser("gen-corpus", parents=[common],
                       help="sample preambles from the configured grammar")
    p.add_argument("--n", type=int, default=None, help="preamble count (default: train_n)")
    p.add_argument("--exclude", default=None,
                   help="preamble file whose entries must not be re-emitted")
    p.set_defaults(func=cmd_gen_corpus, needs_config=True)

    p = sub.add_parser("train", parents=[common],
                       help="train one checkpoint per replica seed")
    p.add_argument("corpus", help="training preamble file")
    p.add_argument("validation", help="validation preamble file")
    p.set_defaults(func=cmd_train, needs_config=True)

    p = sub.add_parser("gen-stimuli", parents=[common],
                       help="expand experiment frames into stimulus files")
    p.add_argument("design", choices=sorted(DESIGN_SLUGS))
    p.add_argument("--frames", default=None,
                   help="frames file (default: the packaged frames for the design)")
    p.set_defaults(func=cmd_gen_stimuli, needs_config=True)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score an ensemble on stimuli or a corpus")
    p.add_argument("--ensemble", required=True, help="directory of seed<k>.ckpt files")
    p.add_argument("--mode", required=True, choices=("conditions", "curve"))
    p.add_argument("--stimuli", default=None, help="stimulus file (conditions mode)")
    p.add_argument("--corpus", default=None, help="preamble file (curve mode)")
    p.set_defaults(func=cmd_evaluate, needs_config=True)

    p = sub.add_parser("report", parents=[common],
                       help="render figures and the directional summary")
    p.add_argument("--stats", required=True, help="directory written by evaluate")
    p.set_defaults(func=cmd_report, needs_config=False)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.needs_config and args.config is None:
        print(f"error: {args.command} requires --config", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, TrainError, EvalError,
            StimulusError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
