"""Shared fixtures: packaged data, desk-scale corpora, and a disk-cached ensemble.

The ensemble fixture trains 10 replicas at the desk scale (50k/5k preambles,
h=50) the first time it runs, then caches the checkpoints under tests/.cache
keyed by the grammar, lexicon, training config, and corpus seeds; later runs
load in seconds.  Delete tests/.cache to force a rebuild.
"""

from __future__ import annotations

import hashlib
import sys
from pathlib import Path

import pytest

from verbnum.corpus import generate_corpus
from verbnum.grammar import load_grammar
from verbnum.lexicon import build_vocabulary
from verbnum.network import load_checkpoint, save_checkpoint
from verbnum.stimuli import (
    gen_exp1,
    gen_exp2,
    gen_exp2_reversed,
    gen_rc_length_probe,
    load_exp1_frames,
    load_exp2_frames,
    load_rc_probe_frames,
)
from verbnum.trainer import TrainConfig, train_replica

DATA = Path(__file__).resolve().parents[1] / "src" / "verbnum" / "data"
CACHE = Path(__file__).resolve().parent / ".cache"

CUTOFF = 500
TRAIN_N = 50_000
VAL_N = 5_000
TRAIN_SEED = [11, 0]
VAL_SEED = [11, 1]
REPLICAS = 10


def desk_train_config(vocab_size: int) -> TrainConfig:
    return TrainConfig(
        dims=(vocab_size, 50, 50),
        batch_size=256,
        max_epochs=20,
        seeds=tuple(range(REPLICAS)),
    )


@pytest.fixture(scope="session")
def vocabulary():
    return build_vocabulary(DATA / "lexicon.tsv", CUTOFF)


@pytest.fixture(scope="session")
def grammar(vocabulary):
    return load_grammar(DATA / "train.grammar", vocabulary)


@pytest.fixture(scope="session")
def desk_corpora(grammar):
    train = generate_corpus(grammar, TRAIN_N, seed=TRAIN_SEED, terminal_weighting="zipf")
    val = generate_corpus(grammar, VAL_N, seed=VAL_SEED, terminal_weighting="zipf")
    return train, val


@pytest.fixture(scope="session")
def stimulus_sets(vocabulary):
    return {
        "exp1": gen_exp1(load_exp1_frames(DATA / "frames_exp1.tsv"), vocabulary),
        "exp2": gen_exp2(load_exp2_frames(DATA / "frames_exp2.tsv"), vocabulary),
        "exp2rev": gen_exp2_reversed(load_exp2_frames(DATA / "frames_exp2.tsv"), vocabulary),
        "rcprobe": gen_rc_length_probe(load_rc_probe_frames(DATA / "frames_rcprobe.tsv"), vocabulary),
    }


@pytest.fixture(scope="session")
def desk_ensemble(vocabulary, desk_corpora):
    config = desk_train_config(vocabulary.size)
    key = hashlib.sha256(
        (DATA / "train.grammar").read_bytes()
        + (DATA / "lexicon.tsv").read_bytes()
        + repr(config).encode()
        + repr((TRAIN_SEED, VAL_SEED, TRAIN_N, VAL_N, "zipf")).encode()
    ).hexdigest()[:16]
    cache = CACHE / key
    paths = [cache / f"seed{s}.ckpt" for s in config.seeds]
    if all(p.exists() for p in paths):
        return [load_checkpoint(p)[0] for p in paths]
    cache.mkdir(parents=True, exist_ok=True)
    train, val = desk_corpora
    ensemble = []
    for seed, path in zip(config.seeds, paths):
        params, log = train_replica(train, val, config, seed)
        save_checkpoint(path, params, seed=seed)
        path.with_suffix(".log").write_text(log.to_text(), encoding="utf-8")
        ensemble.append(params)
    return ensemble


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
