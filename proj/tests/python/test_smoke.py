import json

import pytest

import panelbn


def simulated(seed=3, counties=30, weeks=40):
    spec = panelbn.GroundTruthSpec()
    spec.seed = seed
    truth = panelbn.random_dbn(spec)
    panel = panelbn.sample_panel(truth, counties, weeks, 0.0, seed + 1)
    return truth, panel


def test_version():
    assert panelbn.__version__.count(".") == 2


def test_hill_climb_recovers_truth():
    truth, panel = simulated()
    table = panelbn.make_transition_table(panel)
    learned = panelbn.hill_climb(table, w=4.0)
    report = panelbn.score_recovery(truth.graph, learned)
    assert report["precision"] > 0.8
    assert report["recall"] > 0.8


def test_bootstrap_and_consensus():
    _, panel = simulated()
    table = panelbn.make_transition_table(panel)
    strengths = panelbn.bootstrap_strengths(table, w=4.0, replicates=10, seed=1)
    graph = panelbn.consensus(strengths)
    assert 0.0 < strengths.threshold <= 1.0
    model = panelbn.fit_parameters(graph, table)
    assert panelbn.mean_r_squared(model, table) > 0.5
    again = panelbn.DynamicBN.from_dict(model.to_dict())
    assert json.dumps(again.to_dict(), sort_keys=True) == json.dumps(model.to_dict(), sort_keys=True)


def test_threshold_worked_example():
    assert panelbn.estimate_threshold([0.1, 0.15, 0.9, 1.0]) == pytest.approx(0.525)


def test_impute_ewma():
    nan = float("nan")
    assert panelbn.impute_ewma([1.0, nan, 3.0], 1) == [1.0, 2.0, 3.0]
    assert panelbn.impute_ewma([nan, 5.0, nan], 4) is None


def test_fold_roundtrip():
    truth, _ = simulated()
    assert panelbn.unfold(panelbn.fold(truth.graph)) == truth.graph


def test_cli_entry_point(tmp_path):
    out = tmp_path / "panel.csv"
    code, stdout, stderr = panelbn.cli.run(["simulate", "--counties", "3", "--weeks", "10", "--out", str(out)])
    assert code == 0, stderr
    assert out.read_text().startswith("date,state_code,county_code")
    code, _, _ = panelbn.cli.run(["nonsense"])
    assert code == 64


def test_validation_errors_raise():
    with pytest.raises(ValueError):
        panelbn.estimate_threshold([])
