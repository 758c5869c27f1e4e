import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heretic.dataset import Dataset, FeatureSpec
from heretic.network import Network, NetworkConfig, init_network
from heretic.pipeline import (
    ConfigError,
    ExperimentConfig,
    PipelineError,
    cascade_predict,
    extract,
    extract_only,
    load_problem,
    run_experiment,
    run_fold,
    splits,
    write_artifacts,
)
from heretic.rules import ruleset_predict


def bit_data(X, y, names):
    schema = [FeatureSpec(n, "binary") for n in names]
    return Dataset(schema, np.asarray(X, dtype=float), [str(v) for v in y], ("0", "1"), encoded=True)


def and_gate_net() -> Network:
    hidden = np.array([[1.0], [1.0]]), np.array([-1.5])
    out = np.array([[-1.0, 1.0]]), np.array([0.5, -0.5])
    return Network([hidden[0], out[0]], [hidden[1], out[1]], 100.0, ["A", "B"], ["0", "1"])


def test_and_gate_extraction():
    X = np.array(list(itertools.product([0.0, 1.0], repeat=2)))
    y = [0, 0, 0, 1]
    grow = bit_data(np.vstack([X] * 3), y * 3, ["A", "B"])
    held = bit_data(X, y, ["A", "B"])
    ex = extract(and_gate_net(), grow, held)
    r = ex.ruleset
    assert r.default == "0"
    (term,) = r.rules["1"].terms
    assert {str(l) for l in term} == {"A=1", "B=1"}
    assert ruleset_predict(r, X) == ["0", "0", "0", "1"]
    assert ex.substituted.rounds == 1


def test_network_width_must_match_the_data():
    X = np.eye(3)
    ds = bit_data(X, [0, 1, 0], ["a", "b", "c"])
    with pytest.raises(PipelineError):
        extract(and_gate_net(), ds, ds)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(3,), (4,), (3, 2)]), st.booleans())
def test_substituted_rules_agree_with_the_tree_cascade(seed, hidden, full):
    rng = np.random.default_rng(seed)
    names = [f"x{i}" for i in range(5)]
    net = init_network(NetworkConfig((5, *hidden, 2), init_scale=40.0), rng)
    net.input_names, net.classes = names, ["0", "1"]
    X = rng.integers(0, 2, (60, 5)).astype(float)
    y = rng.integers(0, 2, 60)
    grow, held = bit_data(X[:45], y[:45], names), bit_data(X[45:], y[45:], names)
    every = np.array(list(itertools.product([0.0, 1.0], repeat=5)))
    for mode in ("none", "auto"):
        ex = extract(net, grow, held, min_leaf=1, full_trees=full, minimizer=mode)
        substituted = ruleset_predict(ex.substituted, every)
        assert substituted == cascade_predict(ex.trees, ex.layers, ex.substituted, every)
        assert ruleset_predict(ex.ruleset, every) == substituted


# -- configuration ----------------------------------------------------------


def test_config_validation():
    for bad in (
        {"neuron_trees": "bagged"},
        {"pruning": "sometimes"},
        {"minimizer": "fast"},
        {"methods": "c45"},
        {"repeats": 0},
        {"prune_fraction": 1.5},
        {"hidden": "4,x"},
        {"dataset": "/no/such/file.csv"},
        {"epochs": "many"},
    ):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)


def test_config_ini_round_trip():
    cfg = ExperimentConfig(dataset="vote", hidden="5,2", repeats=3, neuron_trees="full")
    back = ExperimentConfig.from_ini(cfg.to_ini())
    assert back == cfg
    assert back.hidden_layers == (5, 2) and back.full_trees
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini("[network]\nsize = 3\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini("[extras]\n")


def test_neuron_tree_presets():
    assert ExperimentConfig(dataset="monks-2").full_trees
    assert not ExperimentConfig(dataset="vote").full_trees
    assert not ExperimentConfig(dataset="monks-2", neuron_trees="pruned").full_trees


# -- experiments ------------------------------------------------------------


def quick_config(**kw):
    base = dict(dataset="monks-1", repeats=1, epochs=15, methods="heretic,c45,trepan_lite")
    return ExperimentConfig(**{**base, **kw})


def test_runs_are_deterministic(tmp_path):
    cfg = quick_config(repeats=2)
    a, runs_a = run_experiment(cfg)
    b, runs_b = run_experiment(cfg)
    assert a.to_json() == b.to_json()
    pa = write_artifacts(tmp_path / "a", a, runs_a)
    pb = write_artifacts(tmp_path / "b", b, runs_b)
    for key in ("report_json", "report_text", "rules", "network"):
        assert open(pa[key], "rb").read() == open(pb[key], "rb").read()


def test_extract_only_reproduces_the_first_run():
    for trees in ("full", "pruned"):
        cfg = quick_config(neuron_trees=trees)
        _, runs = run_experiment(cfg)
        assert extract_only(runs[0].network, cfg).to_text() == runs[0].ruleset.to_text()


def test_run_records_carry_the_checks():
    _, runs = run_experiment(quick_config())
    (run,) = runs
    notes = run.record.notes
    assert notes["cascade_agreement"] == 1.0
    assert notes["minimized_agreement"] == 1.0
    assert set(run.record.accuracy) == {"network", "heretic", "c45", "trepan_lite"}
    assert set(run.record.timings) >= {"train", "trees", "substitute", "minimize", "evaluate"}


def test_cross_validation_covers_every_row_once():
    cfg = ExperimentConfig(dataset="vote", repeats=1, folds=3, epochs=3, hidden="2", methods="heretic")
    problem = load_problem(cfg)
    tests = [te for _, te in splits(problem, cfg, 0)]
    assert sorted(i for te in tests for i in te) == list(range(len(problem.data)))
    report, runs = run_experiment(cfg)
    assert [r.record.fold for r in runs] == [0, 1, 2]
    assert report.datasets == ["Vote"]


def test_breast_cancer_takes_two_substitution_rounds():
    cfg = ExperimentConfig(dataset="breast-cancer", repeats=1, methods="heretic")
    problem = load_problem(cfg)
    train_idx, test_idx = splits(problem, cfg, 0)[0]
    run = run_fold(problem, cfg, 0, 0, train_idx, test_idx)
    assert cfg.hidden_layers == (11, 3)
    assert run.record.notes["rounds"] == 2
