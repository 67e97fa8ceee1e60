import csv
import json
import re

import numpy as np
import pytest

from textinfluence.cli import main
from textinfluence.modelio import write_features


@pytest.fixture
def world(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["synth", "--out", "w", "--seed", "3", "--samples", "12", "--bank-size", "10"]) == 0
    assert main(["train-aligner", "--features", "w/train_features.ftm",
                 "--targets", "w/train_targets.ftm", "--out", "w/aligner.json"]) == 0
    return tmp_path / "w"


def _meta(world, sid="s0000"):
    return json.loads((world / "samples" / sid / "meta.json").read_text())


def _explain(world, *extra, sid="s0000"):
    meta = _meta(world, sid)
    return ["explain", "--features", f"w/samples/{sid}/features.ftm", "--aligner", "w/aligner.json",
            "--head", "w/head.json", "--bank", f"w/samples/{sid}/bank.json",
            "--class", str(meta["class"]), *extra]


def test_train_reports_tiny_mse(world, capsys):
    main(["train-aligner", "--features", "w/train_features.ftm", "--targets",
          "w/train_targets.ftm", "--out", "w/a2.json", "--holdout", "0.25"])
    out = capsys.readouterr().out
    assert float(re.search(r"train_mse=(\S+)", out).group(1)) <= 1e-12
    assert float(re.search(r"holdout_mse=(\S+)", out).group(1)) <= 1e-12
    manifest = json.loads((world / "aligner.json.manifest.json").read_text())
    assert manifest["manifest_version"] == 1
    assert manifest["config"]["ridge"] == 1e-8
    assert manifest["command"] == "train-aligner"


def test_mismatched_rows_exit_2(world, capsys):
    write_features("short.ftm", np.ones((5, 12)))
    code = main(["train-aligner", "--features", "w/train_features.ftm", "--targets", "short.ftm",
                 "--out", "x.json"])
    assert code == 2
    assert "DimMismatch" in capsys.readouterr().err


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["explain", "--features", "x"])
    assert exc.value.code == 2


def test_runtime_error_exit_1(world, capsys):
    write_features("f.ftm", np.ones((4, 3)))
    write_features("t.ftm", np.ones((4, 2)))
    code = main(["train-aligner", "--features", "f.ftm", "--targets", "t.ftm", "--out", "a.json",
                 "--ridge", "0"])
    assert code == 1
    assert "SingularSystem" in capsys.readouterr().err


def test_explain_puts_planted_first(world):
    for sid in ("s0000", "s0001", "s0005"):
        assert main(_explain(world, "--top-k", "1", "--out", "e.jsonl", sid=sid)) == 0
        lines = [json.loads(l) for l in open("e.jsonl")]
        assert len(lines) == 1
        assert lines[0]["text"] in _meta(world, sid)["planted"]
        assert set(lines[0]) >= {"rank", "text", "score", "method"}
        assert lines[0]["method"] == "faithtrace" and lines[0]["rank"] == 1


def test_explain_random_is_deterministic(world, capsys):
    main(_explain(world, "--method", "random", "--seed", "7", "--top-k", "4"))
    a = capsys.readouterr().out
    main(_explain(world, "--method", "random", "--seed", "7", "--top-k", "4"))
    assert capsys.readouterr().out == a
    assert len(a.splitlines()) == 4


def test_explain_verify(world, capsys):
    assert main(_explain(world, "--verify")) == 0
    err = capsys.readouterr().err
    assert float(re.search(r"max_rel_err=(\S+)", err).group(1)) < 1e-4


def test_explain_by_class_name(world, capsys):
    meta = _meta(world)
    argv = _explain(world)
    argv[argv.index("--class") + 1] = f"class_{meta['class']}"
    assert main(argv) == 0
    assert "faithtrace" in capsys.readouterr().out


def test_evaluate(world):
    assert main(["evaluate", "--samples", "w/samples", "--aligner", "w/aligner.json",
                 "--head", "w/head.json", "--out", "r.json", "--csv", "c.csv", "--jobs", "1"]) == 0
    rep = json.load(open("r.json"))
    table = rep["table"]
    assert set(table) == {"faithtrace", "t2c", "random"}
    assert set(table["faithtrace"]) == {"top1", "top3", "top5"}
    assert table["faithtrace"]["top1"]["nr"] == 0.0
    for k in ("top1", "top3", "top5"):
        for other in ("t2c", "random"):
            assert table["faithtrace"][k]["mean"] >= table[other][k]["mean"]
            assert table["faithtrace"][k]["nr"] <= table[other][k]["nr"]
    rows = list(csv.DictReader(open("c.csv")))
    assert len(rows) == 3 * 6
    assert rep["curves"]["faithtrace"]["display_scale"] == 10.0


def test_evaluate_single_rho(world):
    main(["evaluate", "--samples", "w/samples", "--aligner", "w/aligner.json", "--head",
          "w/head.json", "--rhos", "0.1", "--method", "faithtrace", "--out", "r.json",
          "--csv", "c.csv"])
    rows = list(csv.DictReader(open("c.csv")))
    assert len(rows) == 1 and float(rows[0]["rho"]) == 0.1


def test_evaluate_parallel_matches_serial(world):
    base = ["evaluate", "--samples", "w/samples", "--aligner", "w/aligner.json", "--head",
            "w/head.json"]
    main(base + ["--out", "r1.json", "--jobs", "1"])
    main(base + ["--out", "r4.json", "--jobs", "4"])
    assert open("r1.json").read() == open("r4.json").read()


def test_evaluate_empty_dir(world, tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["evaluate", "--samples", "empty", "--aligner", "w/aligner.json", "--head",
                 "w/head.json", "--out", "r.json"]) == 2


def test_gen_bank_mock(world, tmp_path):
    script = ["- gray fur\n- long tail\n- Long Tail\n- lemur face\n- trees",
              "- branches\n- forest"]
    (tmp_path / "script.json").write_text(json.dumps(script))
    write_features("emb.ftm", np.eye(5, 12) + 0.1)
    assert main(["gen-bank", "--class-name", "lemur", "--mode", "llm", "--llm-count", "5",
                 "--mock-script", "script.json", "--embeddings", "emb.ftm",
                 "--out", "bank.json"]) == 0
    bank = json.load(open("bank.json"))
    assert [c["text"] for c in bank["concepts"]] == ["gray fur", "long tail", "trees",
                                                     "branches", "forest"]
    assert all(c["source"] == "llm" for c in bank["concepts"])
    assert bank["metadata"]["decoding"] == "endpoint defaults"
    assert json.load(open("bank.json.manifest.json"))["command"] == "gen-bank"
