import json

import pytest

from text2sign import cli, config


def run(*args):
    return cli.main(list(args))


def quick(out, *extra):
    return ["--toy", "--out-dir", str(out), "--set", "training.max_steps=20", *extra]


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    for cmd in ("tokenizer-train", "preprocess", "train", "translate", "evaluate"):
        assert run(cmd, *quick(out)) == 0, cmd
    return out


def test_defaults():
    d = config.DEFAULTS
    assert d["tokenizer"]["source"]["vocab_size"] == 2250
    assert d["tokenizer"]["target"]["vocab_size"] == 7000
    assert d["decode"]["beam_size"] == 5
    assert d["training"]["lr"] == 1e-4 and d["model"]["dropout"] == 0.2


def test_precedence_flag_over_file_over_default(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"decode": {"beam_size": 3}, "training": {"lr": 0.01}}))
    cfg = config.resolve(f, [config.parse_assignment("decode.beam_size=7")])
    assert cfg["decode"]["beam_size"] == 7
    assert cfg["training"]["lr"] == 0.01
    assert cfg["training"]["batch_size"] == 32


def test_validation_lists_every_problem(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"task": "t2x", "decode": {"beam_size": 0}, "model": {"dropout": 1.5}}))
    assert run("train", "--config", str(f), "--out-dir", str(tmp_path / "o")) == 1
    err = capsys.readouterr().err
    for needle in ("task", "beam_size", "dropout", "paths.train"):
        assert needle in err


def test_unknown_key_rejected(tmp_path, capsys):
    assert run("preprocess", "--set", "model.depth=3", "--out-dir", str(tmp_path)) == 1
    assert "model.depth" in capsys.readouterr().err


def test_evaluate_identity_gives_100(tmp_path, capsys):
    ref = tmp_path / "ref.txt"
    ref.write_text("A B C D\nE F G H I\n", encoding="utf-8")
    assert run("evaluate", "--hypothesis", str(ref), "--reference", str(ref), "--out-dir", str(tmp_path)) == 0
    report = json.loads((tmp_path / "report_ref.json").read_text())
    assert report["scores"]["bleu4"] == 100.0
    assert "100.00" in capsys.readouterr().out


def test_runtime_failure_exit_code(tmp_path):
    hyp, ref = tmp_path / "h.txt", tmp_path / "r.txt"
    hyp.write_text("A B\n")
    ref.write_text("A B\nC D\n")
    assert run("evaluate", "--hypothesis", str(hyp), "--reference", str(ref), "--out-dir", str(tmp_path)) == 2


def test_missing_artifact_is_config_error(tmp_path, capsys):
    assert run("train", *quick(tmp_path)) == 1
    assert "preprocess" in capsys.readouterr().err


def test_full_flow_artifacts(toy_run):
    names = {p.name for p in toy_run.iterdir()}
    for n in ("tokenizer_source.json", "vocab_hand.json", "data_train.jsonl", "checkpoint_last.bin",
              "loss_log.json", "hyp_test.txt", "report_hyp_test.json", "report_hyp_test.txt"):
        assert n in names
    report = json.loads((toy_run / "report_hyp_test.json").read_text())
    assert report["config"]["training"]["max_steps"] == 20
    assert set(report["hashes"]) >= {"tokenizer_source.json", "vocab_target.json"}
    assert len((toy_run / "hyp_test.txt").read_text().splitlines()) == 50


def test_translate_input_file(toy_run, tmp_path):
    src = tmp_path / "in.txt"
    src.write_text((toy_run / "source_test.txt").read_text().splitlines()[0] + "\n\n")
    out = tmp_path / "out.txt"
    assert run("translate", *quick(toy_run, "--input", str(src), "--output", str(out))) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and lines[1] == ""


def test_t2g2h_evaluate(toy_run):
    assert run("evaluate", *quick(toy_run, "--set", "evaluation.t2g2h=true")) == 0
    report = json.loads((toy_run / "report_hyp_test.json").read_text())
    assert report["level"] == "t2g2h"
    assert report["missing_glosses"]["reference"] == 0


def test_stale_vocabulary_refused(toy_run, tmp_path, capsys):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(toy_run, copy)
    vocab = copy / "vocab_target.json"
    vocab.write_text(vocab.read_text() + " ")
    assert run("translate", *quick(copy)) == 1
    assert "vocab_target.json" in capsys.readouterr().err
    assert run("evaluate", *quick(copy)) == 1


def test_t2h_task_runs(tmp_path):
    args = quick(tmp_path, "--set", "task=\"t2h\"")
    for cmd in ("tokenizer-train", "preprocess", "train", "translate", "evaluate"):
        assert run(cmd, *args) == 0, cmd
    report = json.loads((tmp_path / "report_hyp_test.json").read_text())
    assert report["level"] == "t2h"
