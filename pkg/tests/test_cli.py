import json
import os

import pytest
import yaml
from click.testing import CliRunner

from urgencykit.cli import main
from urgencykit.config import PipelineConfig, load_config

TINY_CFG = {
    "seed": 13,
    "embedding": {"dim": 8, "epochs": 2, "buckets": 4000, "negatives": 3},
    "classifier": {"cv_folds": 2},
    "eval": {"trials": 2},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(TINY_CFG))
    runner = CliRunner()
    result = runner.invoke(main, [
        "synth-corpus", "--out", str(root / "data"),
        "--background", "200", "--labeled", "60", "--target", "30",
        "--wiki-dim", "12", "--config", str(cfg_path),
    ])
    assert result.exit_code == 0, result.output
    return root


def run_cli(args):
    result = CliRunner().invoke(main, args)
    assert result.exit_code == 0, result.output
    return result


def test_synth_corpus_outputs(workdir):
    data = workdir / "data"
    assert (data / "background.jsonl").exists()
    assert (data / "labeled.jsonl").exists()
    assert (data / "wiki.txt").exists()
    assert (data / "target.jsonl").exists()
    labeled = [json.loads(l) for l in (data / "labeled.jsonl").read_text().splitlines()]
    assert len(labeled) == 60
    assert {l["label"] for l in labeled} == {0, 1}


def test_preprocess_command(workdir):
    out = workdir / "tokens.jsonl"
    run_cli(["preprocess", str(workdir / "data" / "labeled.jsonl"), str(out)])
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 60
    assert all(isinstance(r["tokens"], list) for r in rows)


def test_train_embeddings_command(workdir):
    out = workdir / "local.uemb"
    run_cli([
        "train-embeddings", str(workdir / "data" / "background.jsonl"), str(out),
        "--config", str(workdir / "config.yaml"),
    ])
    from urgencykit.embedding import load_model

    model = load_model(str(out))
    assert model.dim == 8


@pytest.fixture(scope="module")
def trained_bundle(workdir):
    out = workdir / "model"
    run_cli([
        "train",
        "--labeled", str(workdir / "data" / "labeled.jsonl"),
        "--background", str(workdir / "data" / "background.jsonl"),
        "--wiki", str(workdir / "data" / "wiki.txt"),
        "--out", str(out),
        "--config", str(workdir / "config.yaml"),
    ])
    return out


def test_train_produces_bundle(trained_bundle):
    assert (trained_bundle / "ensemble.json").exists()
    assert (trained_bundle / "local.uemb").exists()
    doc = json.loads((trained_bundle / "ensemble.json").read_text())
    assert abs(sum(doc["member_weights"]) - 1.0) < 1e-9
    assert len(doc["members"]) == 3


def test_train_is_deterministic(workdir, trained_bundle):
    again = workdir / "model2"
    run_cli([
        "train",
        "--labeled", str(workdir / "data" / "labeled.jsonl"),
        "--background", str(workdir / "data" / "background.jsonl"),
        "--wiki", str(workdir / "data" / "wiki.txt"),
        "--out", str(again),
        "--config", str(workdir / "config.yaml"),
    ])
    for name in ("ensemble.json", "local.uemb"):
        assert (trained_bundle / name).read_bytes() == (again / name).read_bytes()


def test_predict_file_and_stdin_agree(workdir, trained_bundle):
    msgs = workdir / "probe.jsonl"
    msgs.write_text(
        json.dumps({"id": "a", "text": "urgent help needed 30 trapped"}) + "\n"
        + json.dumps({"id": "b", "text": "sunny market day"}) + "\n"
    )
    result = run_cli(["predict", "--model", str(trained_bundle), "--input", str(msgs)])
    rows = [json.loads(l) for l in result.output.strip().splitlines()]
    assert len(rows) == 2
    assert all(0.0 <= r["score"] <= 1.0 for r in rows)
    assert all(r["verdict"] in ("urgent", "non_urgent") for r in rows)

    stdin_result = CliRunner().invoke(
        main, ["predict", "--model", str(trained_bundle)],
        input="urgent help needed 30 trapped\nsunny market day\n",
    )
    assert stdin_result.exit_code == 0
    stdin_rows = [json.loads(l) for l in stdin_result.output.strip().splitlines()]
    assert [r["score"] for r in stdin_rows] == [r["score"] for r in rows]


def test_cli_and_service_scores_match(trained_bundle):
    from fastapi.testclient import TestClient

    from urgencykit.ensemble import load_ensemble
    from urgencykit.service import create_app

    texts = ["urgent help needed 30 trapped", "sunny market day"]
    model = load_ensemble(str(trained_bundle / "ensemble.json"))
    client = TestClient(create_app(model=model))
    service_scores = [
        r["score"] for r in client.post("/v1/score", json={"texts": texts}).json()["results"]
    ]
    probe = "\n".join(texts) + "\n"
    result = CliRunner().invoke(main, ["predict", "--model", str(trained_bundle)], input=probe)
    cli_scores = [json.loads(l)["score"] for l in result.output.strip().splitlines()]
    assert cli_scores == service_scores


def test_evaluate_rq1_command(workdir):
    report_path = workdir / "rq1.json"
    result = run_cli([
        "evaluate-rq1",
        "--labeled", str(workdir / "data" / "labeled.jsonl"),
        "--background", str(workdir / "data" / "background.jsonl"),
        "--wiki", str(workdir / "data" / "wiki.txt"),
        "--systems", "Local,Our Approach",
        "--report", str(report_path),
        "--config", str(workdir / "config.yaml"),
    ])
    assert "Our Approach" in result.output
    doc = json.loads(report_path.read_text())
    assert doc["systems"] == ["Local", "Our Approach"]
    assert doc["meta"]["trials"] == 2


def test_evaluate_rq2_command(workdir):
    report_path = workdir / "rq2.json"
    result = run_cli([
        "evaluate-rq2",
        "--source-labeled", str(workdir / "data" / "labeled.jsonl"),
        "--source-corpus", str(workdir / "data" / "background.jsonl"),
        "--target", str(workdir / "data" / "target.jsonl"),
        "--wiki", str(workdir / "data" / "wiki.txt"),
        "-u", "6",
        "--report", str(report_path),
        "--config", str(workdir / "config.yaml"),
    ])
    assert "Upsample" in result.output
    doc = json.loads(report_path.read_text())
    assert doc["systems"] == ["Local", "Transform", "Upsample", "Our Approach"]
    sizes = doc["meta"]["train_sizes"]
    assert sizes["Upsample"] == 6 * sizes["Transform"]
    assert sizes["Our Approach"] == 6 * sizes["Transform"] + 60


def test_transfer_train_command(workdir):
    out = workdir / "transfer-model"
    run_cli([
        "transfer-train",
        "--target", str(workdir / "data" / "target.jsonl"),
        "--source-labeled", str(workdir / "data" / "labeled.jsonl"),
        "--source-corpus", str(workdir / "data" / "background.jsonl"),
        "--wiki", str(workdir / "data" / "wiki.txt"),
        "--out", str(out),
        "-u", "6",
        "--config", str(workdir / "config.yaml"),
    ])
    doc = json.loads((out / "ensemble.json").read_text())
    assert doc["member_weights"] == [pytest.approx(1 / 3)] * 3
    assert doc["threshold"] == 0.5


def test_config_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({"seed": 1, "no_such_section": {}}))
    with pytest.raises(Exception, match="no_such_section"):
        load_config(str(bad))


def test_config_rejects_out_of_range(tmp_path):
    bad = tmp_path / "bad2.yaml"
    bad.write_text(yaml.safe_dump({"embedding": {"dim": 0}}))
    with pytest.raises(Exception, match="dim"):
        load_config(str(bad))
    bad3 = tmp_path / "bad3.yaml"
    bad3.write_text(yaml.safe_dump({"classifier": {"mode": "quadratic"}}))
    with pytest.raises(Exception, match="mode"):
        load_config(str(bad3))


def test_config_defaults_match_documented_values():
    cfg = PipelineConfig()
    assert cfg.embedding.dim == 20
    assert cfg.embedding.window == 5
    assert cfg.transfer.upsample_factor == 6
    assert cfg.active.seed_size == 100
    assert cfg.active.batch_size == 100
    assert cfg.active.target_total == 400
    assert cfg.eval.trials == 10
    assert cfg.keywords == [
        "hit", "help", "kill", "injure", "strand", "miss", "urgent", "die", "need", "food",
    ]
