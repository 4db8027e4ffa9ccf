import json

import pytest
import scipy.stats

import topicbench as tb
from conftest import run_config


def test_stats_match_scipy():
    groups = [[0.42, 0.47, 0.45, 0.50], [0.38, 0.36, 0.41, 0.39], [0.55, 0.52, 0.58, 0.51]]
    ours = tb.anova(groups)
    ref = scipy.stats.f_oneway(*groups)
    assert ours["statistic"] == pytest.approx(ref.statistic, rel=1e-10)
    assert ours["p_value"] == pytest.approx(ref.pvalue, rel=1e-8)

    tukey = tb.tukey_hsd(groups, ["a", "b", "c"])
    ref = scipy.stats.tukey_hsd(*groups)
    for pair in tukey["pairwise"]:
        i, j = "abc".index(pair["first"]), "abc".index(pair["second"])
        assert pair["p_value"] == pytest.approx(ref.pvalue[i, j], abs=1e-8)

    assert tb.studentized_range_sf(3.5, 3, 12.0) == pytest.approx(
        scipy.stats.studentized_range.sf(3.5, 3, 12.0), abs=1e-9)

    x, y = [1.0, 2.5, 3.1, 4.8, 5.2], [1.4, 2.2, 3.9, 4.1, 6.0]
    assert tb.pearson(x, y)["statistic"] == pytest.approx(scipy.stats.pearsonr(x, y).statistic, rel=1e-12)
    assert tb.paired_t(x, y)["p_value"] == pytest.approx(scipy.stats.ttest_rel(x, y).pvalue, rel=1e-9)


def test_friedman_maximum_for_unanimous_blocks():
    table = [[1.0, 2.0, 3.0]] * 12
    assert tb.friedman(table)["statistic"] == pytest.approx(24.0)


def test_pipeline_from_python(tmp_path, dumps):
    threads, report = tb.load_threads(dumps / "RS_demo.json", dumps / "RC_demo.json")
    assert len(threads) == 60
    assert report["orphan_comments"] == 1

    bow = tb.preprocess(threads)
    assert len(bow) == 60 and all(t["tokens"] for t in bow)

    model, selection, seeds = tb.train("nmf", bow, strategy="sweep", grid=[2, 3, 4], seed=5)
    assert selection["strategy"] == "sweep"
    assert seeds == {"nmf": 5}
    assert len(model["topics"]) == selection["best_k"]

    metrics = tb.evaluate(model, "demo", bow)
    assert metrics["method"] == "NMF"
    assert -1.0 <= metrics["coherence"] <= 1.0
    assert 0.0 < metrics["diversity"] <= 1.0

    chord = tb.chord_graph(model, 0.0)
    assert all(e["source"] < e["target"] for e in chord["edges"])


def test_train_rejects_unsupported_selection(dumps):
    threads, _ = tb.load_threads(dumps / "RS_demo.json", dumps / "RC_demo.json")
    with pytest.raises(tb.ConfigError):
        tb.train("lda", tb.preprocess(threads), strategy="median")


def test_run_report_and_serve(tmp_path, dumps):
    import urllib.error
    import urllib.request

    manifest = tb.run_pipeline(tmp_path / "ws", run_config(), tmp_path)
    assert manifest["status"] == "complete"
    assert manifest["config_hash"] == tb.config_hash(run_config())
    assert manifest["run_id"] == "run-" + manifest["config_hash"][:12]
    assert tb.verify_run(tmp_path / "ws", manifest["run_id"]) == []
    bundle = tb.export_report(tmp_path / "ws", manifest["run_id"])
    assert len(bundle["metric_tables"]) == 5 and len(bundle["chords"]) == 3

    with pytest.raises(tb.NotFoundError):
        tb.export_report(tmp_path / "ws", "")

    server = tb.Server(tmp_path / "ws")
    port = server.start()
    try:
        with urllib.request.urlopen(f"http://127.0.0.1:{port}/datasets/demo/models") as r:
            assert len(json.load(r)["models"]) == 3
        with pytest.raises(urllib.error.HTTPError) as err:
            urllib.request.urlopen(f"http://127.0.0.1:{port}/models/nope/topics")
        assert err.value.code == 404
    finally:
        server.stop()
