import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heretic.network import NetworkConfig, predict, train
from heretic.pipeline import cascade_predict
from heretic.rules import (
    DNF,
    Literal,
    Ruleset,
    SubstitutionError,
    TermExplosionError,
    absorb,
    conjoin,
    rank_by_support,
    rule_complexity,
    ruleset_predict,
    substitute,
    substitute_dnf,
    tree_to_dnf,
)
from heretic.sampler import collect_neuron_samples
from heretic.tree import BINARY, DecisionTree, Node, induce, tree_predict

from test_tree import two_attribute_tree


def L(var, value=1, op="="):
    return Literal(var, op, value)


def terms_of(d: DNF):
    return {frozenset((l.var, l.op, l.value) for l in t) for t in d.terms}


def random_tree(rng, n_features, depth) -> DecisionTree:
    def build(free, d):
        if d == 0 or not free or rng.random() < 0.25:
            return Node(np.array([0, 1]) if rng.random() < 0.5 else np.array([1, 0]))
        f = free[rng.integers(len(free))]
        rest = [g for g in free if g != f]
        return Node(np.array([1, 1]), f, 0.5, build(rest, d - 1), build(rest, d - 1))

    names = [f"x{i}" for i in range(n_features)]
    return DecisionTree(build(list(range(n_features)), depth), names, [BINARY] * n_features)


# -- literals and terms ------------------------------------------------------


def test_conjoin_detects_contradictions_and_tightens_bounds():
    assert conjoin([L("a", 1), L("a", 0)]) is None
    assert conjoin([L("r", 0.3, "<="), L("r", 0.5, ">")]) is None
    assert conjoin([L("r", 0.3, "<="), L("r", 0.3, ">")]) is None
    t = conjoin([L("r", 0.7, "<="), L("r", 0.4, "<="), L("r", 0.1, ">"), L("r", 0.2, ">")])
    assert t == frozenset({L("r", 0.4, "<="), L("r", 0.2, ">")})
    assert conjoin([]) == frozenset()


def test_literal_rendering_and_negation():
    assert str(L("a1=2")) == "a1=2"
    assert str(L("a1=2", 0)) == "a1!=2"
    assert str(L("flag", 0)) == "flag=0"
    assert str(L("r", 0.25, ">")) == "r > 0.25"
    assert L("r", 0.25, ">").negate() == L("r", 0.25, "<=")
    assert L("a", 1).negate() == L("a", 0)


def test_absorb_drops_supersets_and_duplicates():
    a, b, c = L("a"), L("b"), L("c")
    out = absorb([frozenset({a, b}), frozenset({a}), frozenset({a}), frozenset({b, c})])
    assert set(out) == {frozenset({a}), frozenset({b, c})}
    assert absorb([frozenset({a}), frozenset()]) == [frozenset()]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([20, 300]))
def test_absorb_matches_the_definition(seed, n):
    rng = np.random.default_rng(seed)
    pool = [L(f"v{i}", int(b)) for i in range(12) for b in (0, 1)]
    terms = [frozenset(pool[j] for j in rng.choice(len(pool), int(rng.integers(1, 5)), replace=False))
             for _ in range(n)]
    expected = {t for t in set(terms) if not any(u < t for u in terms)}
    assert set(absorb(terms)) == expected
    assert len(absorb(terms)) == len(expected)


def test_empty_dnf_is_false_and_empty_term_is_true():
    X = np.array([[0.0], [1.0]])
    assert not DNF(()).evaluate(X, ["a"]).any()
    assert DNF((frozenset(),)).evaluate(X, ["a"]).all()


def test_unknown_symbol_is_an_error():
    with pytest.raises(KeyError):
        DNF.of([[L("zz")]]).evaluate(np.zeros((1, 1)), ["a"])


# -- trees to DNF ----------------------------------------------------------


def test_two_attribute_tree_to_dnf():
    c2, c1 = tree_to_dnf(two_attribute_tree())
    assert terms_of(c1) == {
        frozenset({("A", "=", 1), ("B", "=", 1)}),
        frozenset({("A", "=", 1), ("B", "=", 0)}),
    }
    assert terms_of(c2) == {frozenset({("A", "=", 0)})}
    assert c1.consequent == "C1"


def test_single_leaf_tree_dnfs():
    t = DecisionTree(Node(np.array([0, 3])), ["a"], [BINARY])
    d0, d1 = tree_to_dnf(t)
    assert d1.is_true and d0.is_false


def test_random_six_feature_tree_on_random_inputs():
    rng = np.random.default_rng(5)
    t = random_tree(rng, 6, 6)
    d0, d1 = tree_to_dnf(t)
    X = rng.integers(0, 2, (1000, 6)).astype(float)
    expected = np.array([tree_predict(t, x) for x in X])
    np.testing.assert_array_equal(d1.evaluate(X, t.input_names), expected == 1)
    np.testing.assert_array_equal(d0.evaluate(X, t.input_names), expected == 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_tree_dnfs_partition_the_input_space(seed, width):
    rng = np.random.default_rng(seed)
    t = random_tree(rng, width, width)
    d0, d1 = tree_to_dnf(t)
    X = np.array(list(itertools.product([0.0, 1.0], repeat=width)))
    f0, f1 = d0.evaluate(X, t.input_names), d1.evaluate(X, t.input_names)
    assert not (f0 & f1).any() and (f0 | f1).all()
    np.testing.assert_array_equal(f1, t.route(X) == 1)


def test_real_feature_paths_become_threshold_literals():
    s_tree = DecisionTree(
        Node(np.array([2, 2]), 0, 0.4, Node(np.array([2, 0])),
             Node(np.array([0, 2]), 0, 0.8, Node(np.array([0, 2])), Node(np.array([1, 0])))),
        ["r"], ["real"],
    )
    d0, d1 = tree_to_dnf(s_tree)
    assert terms_of(d1) == {frozenset({("r", ">", 0.4), ("r", "<=", 0.8)})}
    X = np.linspace(0, 1, 101)[:, None]
    np.testing.assert_array_equal(d1.evaluate(X, ["r"]), s_tree.route(X) == 1)


# -- substitution ----------------------------------------------------------


def small_network_rules():
    out1 = DNF.of([[L("X", 1)], [L("Y", 0), L("Z", 1)]], "Class=1")
    out0 = DNF.of([[L("X", 0)]], "Class=0")
    x1 = DNF.of([[L("A", 1), L("B", 0)], [L("A", 0), L("C", 1)]], "X=1")
    x0 = DNF.of([[L("A", 0), L("B", 0)], [L("A", 1), L("C", 0)]], "X=0")
    return out1, out0, {"X": (x0, x1)}


def test_substitution_of_one_hidden_unit():
    out1, out0, hidden = small_network_rules()
    class1, rounds = substitute_dnf(out1, hidden)
    assert rounds == 1
    assert terms_of(class1) == {
        frozenset({("A", "=", 1), ("B", "=", 0)}),
        frozenset({("A", "=", 0), ("C", "=", 1)}),
        frozenset({("Y", "=", 0), ("Z", "=", 1)}),
    }
    class0, _ = substitute_dnf(out0, hidden)
    assert terms_of(class0) == {
        frozenset({("A", "=", 0), ("B", "=", 0)}),
        frozenset({("A", "=", 1), ("C", "=", 0)}),
    }


def small_ruleset() -> Ruleset:
    out1, out0, hidden = small_network_rules()
    names = ["A", "B", "C", "Y", "Z"]
    c1, _ = substitute_dnf(out1, hidden)
    c0, _ = substitute_dnf(out0, hidden)
    return Ruleset({"1": DNF(c1.terms, "1"), "0": DNF(c0.terms, "0")}, "0", ["1", "0"], names)


def test_small_ruleset_complexity_and_prediction():
    r = small_ruleset()
    assert rule_complexity(r) == (2, 5, 10)
    # A=1, B=0 with Y and Z off
    assert ruleset_predict(r, np.array([1, 0, 0, 0, 0])) == "1"
    # A=0, B=1, C=0 and Z off: nothing fires, default class
    assert ruleset_predict(r, np.array([0, 1, 0, 1, 0])) == "0"


def test_true_only_ruleset_complexity():
    r = Ruleset({"yes": DNF((frozenset(),), "yes")}, "yes", ["yes"], [])
    assert rule_complexity(r) == (1, 1, 0)


def test_no_neuron_literals_is_a_fixpoint():
    d = DNF.of([[L("A", 1), L("B", 0)]])
    out, rounds = substitute_dnf(d, {"X": small_network_rules()[2]["X"]})
    assert out == d and rounds == 0


def test_cycles_are_rejected():
    loop = {"P": (DNF.of([[L("Q", 0)]]), DNF.of([[L("Q", 1)]])), "Q": (DNF.of([[L("P", 0)]]), DNF.of([[L("P", 1)]]))}
    with pytest.raises(SubstitutionError):
        substitute_dnf(DNF.of([[L("P", 1)]]), loop)


def test_term_explosion_guard():
    # each hidden unit is an OR of 4 distinct inputs; a conjunction of 5 of them has 4^5 terms
    rules = {}
    for h in range(5):
        ones = DNF.of([[L(f"i{h}_{j}")] for j in range(4)])
        zeros = DNF.of([[L(f"i{h}_{j}", 0) for j in range(4)]])
        rules[f"h{h}"] = (zeros, ones)
    top = DNF.of([[L(f"h{h}") for h in range(5)]])
    assert len(substitute_dnf(top, rules)[0].terms) == 4**5
    with pytest.raises(TermExplosionError, match="smaller networks or stronger pruning"):
        substitute_dnf(top, rules, limit=500)


def test_two_hidden_layers_take_two_rounds():
    h1 = {"a": (DNF.of([[L("x", 0)]]), DNF.of([[L("x", 1)]])), "b": (DNF.of([[L("y", 0)]]), DNF.of([[L("y", 1)]]))}
    h2 = {"c": (DNF.of([[L("a", 0)], [L("b", 0)]]), DNF.of([[L("a", 1), L("b", 1)]]))}
    out = {
        "o0": (DNF.of([[L("c", 1)]]), DNF.of([[L("c", 0)]])),
        "o1": (DNF.of([[L("c", 0)]]), DNF.of([[L("c", 1)]])),
    }
    r = substitute({**h1, **h2, **out}, {"n": "o0", "p": "o1"}, ["x", "y"])
    assert r.rounds == 2
    assert terms_of(r.rules["p"]) == {frozenset({("x", "=", 1), ("y", "=", 1)})}
    assert terms_of(r.rules["n"]) == {frozenset({("x", "=", 0)}), frozenset({("y", "=", 0)})}


def test_support_priority_counts_term_coverage():
    r = small_ruleset()
    X = np.array([[1, 0, 1, 0, 0], [0, 0, 0, 0, 0], [0, 1, 1, 0, 0], [1, 0, 1, 0, 1]], dtype=float)
    ranked = rank_by_support(r, X)
    # class 1 terms cover rows 0, 2, 3 (row 3 twice); class 0 covers row 1 only
    assert ranked.support == {"1": 4, "0": 1}
    assert ranked.priority == ["1", "0"]


def test_ruleset_serialization_round_trip():
    r = small_ruleset()
    back = Ruleset.from_dict(r.to_dict())
    assert back.to_text() == r.to_text()
    text = r.to_text()
    assert "IF A=1 AND B=0 THEN 1" in text and text.endswith("DEFAULT 0\n")


def test_xor_network_rules_agree_with_cascade_and_network():
    X = np.array(list(itertools.product([0.0, 1.0], repeat=2)))
    y = np.array([0, 1, 1, 0])
    cfg = NetworkConfig((2, 4, 2), steepness=5.0, learning_rate=0.1, epochs=3000, seed=2,
                        weight_decay=0.0, lr_schedule="constant", init_scale=2.5)
    net = train(X, y, cfg, input_names=["a", "b"], classes=["0", "1"])
    sets = collect_neuron_samples(net, X, ["a", "b"], [BINARY, BINARY])
    trees = {s.symbol: induce(s, min_leaf=1) for s in sets}
    pairs = {sym: tree_to_dnf(t, sym) for sym, t in trees.items()}
    r = substitute(pairs, {"0": "out[0]", "1": "out[1]"}, ["a", "b"])
    r = rank_by_support(r, X, "0")
    layers = [net.unit_names(1), net.unit_names(2)]
    assert ruleset_predict(r, X) == cascade_predict(trees, layers, r, X)
    assert ruleset_predict(r, X) == predict(net, X) == ["0", "1", "1", "0"]
