"""End-to-end command-line pipeline on a miniature configuration."""

import hashlib
import json

import pytest

from verbnum import __version__
from verbnum.cli import _seed_list, main, resolve_path, CliError
from verbnum.evaluation import load_curve, load_records, load_stats
from verbnum.network import load_checkpoint
from verbnum.stimuli import load_stimuli

TINY_CFG = """\
lexicon = builtin:lexicon.tsv
grammar = builtin:train.grammar
cutoff = 500
input_dim = 12
hidden_dim = 12
learning_rate = 2e-3
batch_size = 32
max_epochs = 2
replicas = 2
seed_base = 0
train_n = 300
val_n = 120
max_depth = 20
max_tokens = 40
terminal_weighting = zipf
bootstrap_samples = 300
curve_min_n = 1
"""


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def pipe(tmp_path_factory):
    """One full pipeline run: corpora, ensemble, stimuli, evaluations, report."""
    root = tmp_path_factory.mktemp("cli_pipeline")
    cfg = root / "tiny.cfg"
    cfg.write_text(TINY_CFG, encoding="utf-8")
    train_tsv = root / "train.tsv"
    val_tsv = root / "val.tsv"
    ensemble = root / "ensemble"
    eval_dir = root / "eval"
    report_dir = root / "report"
    stims = {slug: root / f"{slug}.stim"
             for slug in ("exp1", "exp2", "exp2rev", "rcprobe")}

    assert main(["gen-corpus", "--config", str(cfg), "--seed", "3,0",
                 "--out", str(train_tsv)]) == 0
    assert main(["gen-corpus", "--config", str(cfg), "--seed", "3,1",
                 "--n", "120", "--exclude", str(train_tsv),
                 "--out", str(val_tsv)]) == 0
    assert main(["train", str(train_tsv), str(val_tsv),
                 "--config", str(cfg), "--out", str(ensemble)]) == 0
    for slug, path in stims.items():
        assert main(["gen-stimuli", slug, "--config", str(cfg),
                     "--out", str(path)]) == 0
        assert main(["evaluate", "--config", str(cfg), "--ensemble", str(ensemble),
                     "--mode", "conditions", "--stimuli", str(path),
                     "--out", str(eval_dir)]) == 0
    assert main(["evaluate", "--config", str(cfg), "--ensemble", str(ensemble),
                 "--mode", "curve", "--corpus", str(val_tsv),
                 "--out", str(eval_dir)]) == 0
    assert main(["report", "--config", str(cfg), "--stats", str(eval_dir),
                 "--out", str(report_dir)]) == 0
    return {
        "root": root, "cfg": cfg, "train": train_tsv, "val": val_tsv,
        "ensemble": ensemble, "eval": eval_dir, "report": report_dir,
        "stims": stims,
    }


def test_gen_corpus_artifacts(pipe):
    text = pipe["train"].read_text(encoding="utf-8")
    assert len(text.splitlines()) == 300
    doc = json.loads((pipe["root"] / "train.tsv.manifest.json").read_text())
    assert sorted(doc) == ["arguments", "command", "config", "inputs",
                           "outputs", "seed", "tool"]
    assert doc["tool"] == f"verbnum/{__version__}"
    assert doc["command"] == "gen-corpus"
    assert doc["seed"] == [3, 0]
    assert doc["config"]["train_n"] == "300"
    assert "builtin:lexicon.tsv" in doc["inputs"]
    assert doc["outputs"] == {str(pipe["train"]): sha256(pipe["train"])}


def test_gen_corpus_rerun_is_byte_identical(pipe, tmp_path):
    out = tmp_path / "again.tsv"
    assert main(["gen-corpus", "--config", str(pipe["cfg"]), "--seed", "3,0",
                 "--out", str(out)]) == 0
    assert out.read_bytes() == pipe["train"].read_bytes()


def test_corpus_exclusion_keeps_splits_disjoint(pipe):
    train_lines = set(pipe["train"].read_text(encoding="utf-8").splitlines())
    val_lines = set(pipe["val"].read_text(encoding="utf-8").splitlines())
    assert len(val_lines) == 120
    assert not train_lines & val_lines


def test_gen_corpus_zero_preambles(pipe, tmp_path):
    out = tmp_path / "none.tsv"
    assert main(["gen-corpus", "--config", str(pipe["cfg"]), "--n", "0",
                 "--out", str(out)]) == 0
    assert out.read_bytes() == b""


def test_train_artifacts(pipe):
    for seed in (0, 1):
        ckpt = pipe["ensemble"] / f"seed{seed}.ckpt"
        params, header = load_checkpoint(ckpt)
        assert params.embeddings.shape[1] == 12
        assert (pipe["ensemble"] / f"seed{seed}.log").stat().st_size > 0
    doc = json.loads((pipe["ensemble"] / "ensemble.manifest.json").read_text())
    assert doc["command"] == "train"
    assert doc["seed"] == [0, 1]
    assert len(doc["outputs"]) == 4
    for path_text, digest in doc["outputs"].items():
        from pathlib import Path

        assert sha256(Path(path_text)) == digest


def test_train_rerun_is_byte_identical(pipe, tmp_path):
    out = tmp_path / "ensemble2"
    assert main(["train", str(pipe["train"]), str(pipe["val"]),
                 "--config", str(pipe["cfg"]), "--out", str(out)]) == 0
    for seed in (0, 1):
        assert ((out / f"seed{seed}.ckpt").read_bytes()
                == (pipe["ensemble"] / f"seed{seed}.ckpt").read_bytes())


def test_gen_stimuli_artifacts(pipe, vocabulary):
    wanted = {"exp1": 8, "exp2": 6, "exp2rev": 6, "rcprobe": 6}
    for slug, conditions in wanted.items():
        sset = load_stimuli(pipe["stims"][slug], vocabulary)
        assert len(sset) % conditions == 0
        assert len(sset.by_condition()) == conditions
    manifest = json.loads(
        (pipe["root"] / "exp1.stim.manifest.json").read_text())
    assert manifest["arguments"]["design"] == "exp1"
    assert manifest["arguments"]["frames"] == "builtin:frames_exp1.tsv"


def test_evaluate_conditions_artifacts(pipe, vocabulary):
    sset = load_stimuli(pipe["stims"]["exp1"], vocabulary)
    records = load_records(pipe["eval"] / "exp1_records.tsv")
    assert len(records) == 2 * len(sset)
    stats = load_stats(pipe["eval"] / "exp1_stats.tsv")
    assert len(stats) == 8
    assert all(0.0 <= s.error_rate <= 1.0 for s in stats)
    doc = json.loads((pipe["eval"] / "exp1.manifest.json").read_text())
    ckpts = [k for k in doc["inputs"] if k.endswith(".ckpt")]
    assert len(ckpts) == 2


def test_evaluate_curve_artifacts(pipe):
    records = load_records(pipe["eval"] / "corpus_records.tsv")
    assert len(records) == 2 * 120
    curve = load_curve(pipe["eval"] / "curve.tsv")
    assert 0.0 <= curve.baseline_error_rate <= 1.0
    assert 0 in curve.points
    assert json.loads((pipe["eval"] / "curve.manifest.json").read_text())["command"] == "evaluate"


def test_evaluate_rerun_is_byte_identical(pipe, tmp_path):
    out = tmp_path / "eval2"
    assert main(["evaluate", "--config", str(pipe["cfg"]),
                 "--ensemble", str(pipe["ensemble"]), "--mode", "conditions",
                 "--stimuli", str(pipe["stims"]["exp1"]), "--out", str(out)]) == 0
    for name in ("exp1_records.tsv", "exp1_stats.tsv"):
        assert (out / name).read_bytes() == (pipe["eval"] / name).read_bytes()


def test_report_artifacts(pipe):
    for name in ("fig_attractor_curve.png", "fig_exp1_conditions.png",
                 "fig_exp2_conditions.png", "fig_rc_length_probe.png"):
        assert (pipe["report"] / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    summary = (pipe["report"] / "summary.txt").read_text(encoding="utf-8")
    assert len(summary.splitlines()) == 8  # two header lines, six findings
    assert json.loads(
        (pipe["report"] / "report.manifest.json").read_text())["command"] == "report"


# -- failure paths ----------------------------------------------------------

def test_commands_require_config(capsys):
    assert main(["train", "a.tsv", "b.tsv", "--out", "x"]) == 1
    assert "requires --config" in capsys.readouterr().err


def test_unknown_builtin_path(capsys, tmp_path):
    assert main(["gen-corpus", "--config", "builtin:configs/nope.cfg",
                 "--out", str(tmp_path / "x.tsv")]) == 1
    assert "no builtin data file" in capsys.readouterr().err


def test_evaluate_conditions_needs_stimuli(pipe, capsys, tmp_path):
    assert main(["evaluate", "--config", str(pipe["cfg"]),
                 "--ensemble", str(pipe["ensemble"]), "--mode", "conditions",
                 "--out", str(tmp_path)]) == 1
    assert "requires --stimuli" in capsys.readouterr().err


def test_evaluate_curve_needs_corpus(pipe, capsys, tmp_path):
    assert main(["evaluate", "--config", str(pipe["cfg"]),
                 "--ensemble", str(pipe["ensemble"]), "--mode", "curve",
                 "--out", str(tmp_path)]) == 1
    assert "requires --corpus" in capsys.readouterr().err


def test_evaluate_needs_checkpoints(pipe, capsys, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["evaluate", "--config", str(pipe["cfg"]), "--ensemble", str(empty),
                 "--mode", "curve", "--corpus", str(pipe["val"]),
                 "--out", str(tmp_path / "out")]) == 1
    assert "no seed<k>.ckpt checkpoints" in capsys.readouterr().err


def test_report_needs_inputs(capsys, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["report", "--stats", str(empty), "--out", str(tmp_path / "r")]) == 1
    assert "missing report inputs" in capsys.readouterr().err


def test_gen_stimuli_rejects_bad_frames_file(pipe, capsys, tmp_path):
    assert main(["gen-stimuli", "exp1", "--config", str(pipe["cfg"]),
                 "--frames", "builtin:lexicon.tsv",
                 "--out", str(tmp_path / "x.stim")]) == 1
    assert "error:" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert f"verbnum {__version__}" in capsys.readouterr().out


def test_resolve_path_scheme():
    assert resolve_path("builtin:lexicon.tsv").exists()
    with pytest.raises(CliError, match="no builtin data file"):
        resolve_path("builtin:missing.tsv")


def test_seed_list_parsing():
    assert _seed_list("3,0") == [3, 0]
    assert _seed_list("11 1") == [11, 1]
    import argparse

    with pytest.raises(argparse.ArgumentTypeError):
        _seed_list("3,x")
