import json
import subprocess

import pytest

from conftest import run_config


def run(cli, *args, cwd, check=True):
    proc = subprocess.run([cli, "--log-level", "warn", *map(str, args)], cwd=cwd, capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"{args[0]} failed ({proc.returncode}): {proc.stderr}")
    return proc


def test_stepwise_commands(cli, tmp_path, dumps):
    run(cli, "ingest", "--dumps", dumps, "--name", "demo", "-o", "threads.json", cwd=tmp_path)
    assert len(json.loads((tmp_path / "threads.json").read_text())) == 60

    run(cli, "preprocess", "--threads", "threads.json", "-o", "bow.json", cwd=tmp_path)
    run(cli, "preprocess", "--threads", "threads.json", "--path", "embed", "-o", "embed.json", cwd=tmp_path)
    run(cli, "train", "--method", "lda", "--topics", 3, "--tokens", "bow.json", "-o", "lda.json", cwd=tmp_path)
    run(cli, "select", "--method", "nmf", "--strategy", "sweep", "--grid", "2,3,4", "--tokens", "bow.json",
        "-o", "nmf.json", "--selection-out", "nmf_selection.json", cwd=tmp_path)
    (tmp_path / "embed_options.json").write_text(json.dumps({"min_cluster_size": 8, "n_neighbors": 10}))
    run(cli, "select", "--method", "embed", "--strategy", "median", "--runs", 3, "--config", "embed_options.json",
        "--tokens", "embed.json", "-o", "embed_model.json", cwd=tmp_path)

    assert len(json.loads((tmp_path / "lda.json").read_text())["topics"]) == 3
    selection = json.loads((tmp_path / "nmf_selection.json").read_text())
    assert [p["k"] for p in selection["selection"]["curve"]] == [2, 3, 4]

    out = run(cli, "evaluate", "--model", "lda.json", "--model", "nmf.json", "--model", "embed_model.json",
              "--reference", "bow.json", "--dataset", "demo", cwd=tmp_path).stdout
    reports = json.loads(out)
    assert [r["method"] for r in reports] == ["LDA", "NMF", "EMBED"]

    table = "dataset,LDA,NMF,EMBED\na,0.41,0.38,0.52\nb,0.45,0.36,0.55\nc,0.43,0.40,0.50\n"
    (tmp_path / "coherence.csv").write_text(table)
    stats = json.loads(run(cli, "compare", "--table", "coherence.csv", "--pairs", "pairs.csv", cwd=tmp_path).stdout)
    assert stats["tables"]["coherence"]["anova"]["test"] == "one_way_anova"
    assert len((tmp_path / "pairs.csv").read_text().splitlines()) == 4


def test_run_report_verify(cli, tmp_path, dumps):
    (tmp_path / "config.json").write_text(json.dumps(run_config()))
    run_id = run(cli, "run", "--config", "config.json", "--workspace", "ws", cwd=tmp_path).stdout.strip()
    assert run_id.startswith("run-")
    assert "ok" in run(cli, "verify", "--workspace", "ws", "--run", run_id, cwd=tmp_path).stdout
    run(cli, "report", "--workspace", "ws", "--run", run_id, cwd=tmp_path)
    assert len(list((tmp_path / "ws" / "reports" / run_id).glob("chord_*.json"))) == 3

    missing = run(cli, "report", "--workspace", "ws", "--run", "nope", cwd=tmp_path, check=False)
    assert missing.returncode != 0 and "not found" in missing.stderr


def test_failed_run_exits_nonzero(cli, tmp_path):
    config = run_config()
    config["datasets"][0]["dumps"] = "absent"
    (tmp_path / "config.json").write_text(json.dumps(config))
    proc = run(cli, "run", "--config", "config.json", "--workspace", "ws", cwd=tmp_path, check=False)
    assert proc.returncode != 0
    manifest = json.loads((tmp_path / "ws" / "runs" / proc.stdout.strip() / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["failed_stage"] == "ingest"


@pytest.mark.parametrize("args", [["train", "--method", "svd"], ["select", "--strategy", "best"], []])
def test_usage_errors(cli, tmp_path, args):
    assert run(cli, *args, cwd=tmp_path, check=False).returncode != 0
