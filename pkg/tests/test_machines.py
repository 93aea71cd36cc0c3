import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings

from qcausal.families import cycle, flower, heralding_coin, iid, perturbed_coin
from qcausal.machines import (
    EnumerationCapError,
    MachineError,
    UnifilarMachine,
    block_entropy,
    excess_entropy_estimate,
    find_isomorphism,
    future_morphs,
    isomorphic,
    load_machine,
    minimize,
    morph_fidelity,
    morph_fidelity_matrix,
    save_machine,
    stationary_word_probability,
    statistical_complexity,
    topological_complexity,
    validate,
    word_probability,
)

from conftest import random_machines


def brute_block_entropy(m, length):
    """H(X_{0:L}) by listing every word."""
    h = 0.0
    for word in itertools.product(m.alphabet, repeat=length):
        p = stationary_word_probability(m, list(word))
        if p > 0:
            h -= p * math.log2(p)
    return h


def test_from_edges_builds_arrays():
    m = heralding_coin(0.2, 0.6)
    assert m.alphabet == ("0", "1", "2")
    assert np.allclose(m.emission, [[0.8, 0.2, 0.0], [0.0, 0.4, 0.6]])
    assert m.successor.tolist() == [[0, 1, -1], [-1, 1, 0]]


def test_non_unifilar_edges_rejected():
    with pytest.raises(MachineError, match="non-unifilar"):
        UnifilarMachine.from_edges("a", ["x", "y"], [("x", "a", 0.5, "x"), ("x", "a", 0.5, "y"), ("y", "a", 1, "x")])


def test_validate_reports_each_problem():
    m = UnifilarMachine(("0", "1"), ("a", "b", "c"), np.array([[0.5, 0.4], [1.0, 0.0], [1.0, 0.0]]),
                        np.array([[0, -1], [1, -1], [0, -1]]))
    problems = validate(m)
    assert any(p.startswith("row sum") for p in problems)
    assert any(p.startswith("dangling successor") for p in problems)
    assert any(p.startswith("multiple recurrent classes") for p in problems)


def test_validate_flags_unreachable_state():
    m = UnifilarMachine.from_edges("0", ["a", "b"], [("a", "0", 1.0, "a"), ("b", "0", 1.0, "a")])
    assert any(p.startswith("unreachable state") for p in validate(m))


@pytest.mark.parametrize("machine", [heralding_coin(0.3, 0.7), flower(4, 3), cycle(4)])
def test_valid_families(machine):
    assert validate(machine) == []


def test_file_round_trip(tmp_path):
    m = flower(4, 2)
    path = tmp_path / "m.json"
    save_machine(m, path)
    back = load_machine(path)
    assert back.states == m.states and np.allclose(back.emission, m.emission)
    assert isomorphic(back, m)


def test_file_row_tolerance(tmp_path):
    data = heralding_coin(0.5, 0.5).to_dict()
    data["transitions"][0]["prob"] += 1e-10
    (tmp_path / "ok.json").write_text(json.dumps(data))
    m = load_machine(tmp_path / "ok.json")
    assert np.allclose(m.emission.sum(axis=1), 1.0, atol=1e-15)
    data["transitions"][0]["prob"] += 1e-6
    (tmp_path / "bad.json").write_text(json.dumps(data))
    with pytest.raises(MachineError, match="row sum"):
        load_machine(tmp_path / "bad.json")


def test_malformed_json(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(MachineError):
        load_machine(tmp_path / "x.json")


def test_word_probability_path():
    m = heralding_coin(0.2, 0.6)
    assert np.isclose(word_probability(m, "s0", "012"), 0.8 * 0.2 * 0.6)
    assert word_probability(m, "s0", "2") == 0.0


@settings(max_examples=40, deadline=None)
@given(random_machines())
def test_words_of_each_length_sum_to_one(m):
    for L in (1, 3):
        total = sum(stationary_word_probability(m, list(w)) for w in itertools.product(m.alphabet, repeat=L))
        assert np.isclose(total, 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(random_machines(max_states=3))
def test_block_entropy_matches_enumeration(m):
    for L in range(0, 5):
        assert np.isclose(block_entropy(m, L), brute_block_entropy(m, L), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(random_machines())
def test_block_entropy_is_subadditive_and_concave(m):
    h = [block_entropy(m, L) for L in range(6)]
    diffs = np.diff(h)
    assert np.all(diffs >= -1e-12)
    assert np.all(np.diff(diffs) <= 1e-10)


def test_block_entropy_examples():
    assert np.isclose(block_entropy(iid([0.5, 0.5]), 8), 8.0)
    assert np.isclose(block_entropy(cycle(3), 5), math.log2(3))


def test_block_entropy_cap():
    with pytest.raises(EnumerationCapError):
        block_entropy(heralding_coin(0.3, 0.6), 6, cap=1)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_excess_entropy_of_cycle(k):
    est = excess_entropy_estimate(cycle(k))
    assert est.converged and np.isclose(est.value, math.log2(k))


def test_excess_entropy_of_iid_is_zero():
    est = excess_entropy_estimate(iid([0.2, 0.3, 0.5]))
    assert est.converged and abs(est.value) < 1e-12


def test_excess_entropy_of_markov_chain():
    """For an order-1 chain E = H(X_0) - H(X_1 | X_0)."""
    p, q = 0.3, 0.6
    est = excess_entropy_estimate(perturbed_coin(p, q))
    pi = np.array([q, p]) / (p + q)
    h1 = -(pi * np.log2(pi)).sum()
    hmu = pi[0] * _h(p) + pi[1] * _h(q)
    assert est.converged and np.isclose(est.value, h1 - hmu, atol=1e-12)


def _h(x):
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def test_complexities():
    assert np.isclose(statistical_complexity(heralding_coin(0.5, 0.5)), 1.0)
    assert np.isclose(topological_complexity(flower(4, 2)), math.log2(5))
    assert np.isclose(statistical_complexity(flower(4, 2)), 2.0)


def test_future_morphs_are_distributions():
    table = future_morphs(heralding_coin(0.3, 0.6), 3)
    for s in ("s0", "s1"):
        for L in range(4):
            assert np.isclose(sum(table.distribution(s, L).values()), 1.0)


def brute_fidelity(m, i, j, L):
    di = future_morphs(m, L).distribution(m.states[i], L)
    dj = future_morphs(m, L).distribution(m.states[j], L)
    return sum(math.sqrt(p * dj.get(w, 0.0)) for w, p in di.items())


@settings(max_examples=25, deadline=None)
@given(random_machines(max_states=3))
def test_fidelity_recursion_matches_enumeration(m):
    f = morph_fidelity_matrix(m, 4)
    for i in range(m.n_states):
        for j in range(m.n_states):
            assert np.isclose(f[3, i, j], brute_fidelity(m, i, j, 4), atol=1e-12)


def test_fidelity_is_nonincreasing_in_horizon():
    value, seq = morph_fidelity(heralding_coin(0.4, 0.7), "s0", "s1", 10)
    assert np.all(np.diff(seq) <= 1e-15)
    assert np.isclose(seq[0], math.sqrt(0.4 * 0.3))
    assert value == seq[-1]


def _redundant_heralding():
    """Heralding coin with state s0 split into two identical copies."""
    p, q = 0.3, 0.6
    return UnifilarMachine.from_edges(
        ["0", "1", "2"],
        ["a", "a2", "b"],
        [("a", "0", 1 - p, "a2"), ("a", "1", p, "b"), ("a2", "0", 1 - p, "a"), ("a2", "1", p, "b"),
         ("b", "2", q, "a2"), ("b", "1", 1 - q, "b")],
    )


def test_minimize_merges_equivalent_states():
    small = minimize(_redundant_heralding())
    assert small.n_states == 2
    assert isomorphic(small, heralding_coin(0.3, 0.6))


def test_minimize_keeps_minimal_machines():
    m = flower(8, 3)
    assert minimize(m).n_states == m.n_states


@settings(max_examples=30, deadline=None)
@given(random_machines())
def test_minimize_preserves_word_distribution(m):
    small = minimize(m)
    for w in itertools.product(m.alphabet, repeat=3):
        assert np.isclose(stationary_word_probability(m, list(w)), stationary_word_probability(small, list(w)), atol=1e-12)


def test_isomorphism_mapping_and_mismatch():
    a = heralding_coin(0.3, 0.6)
    b = a.permute([1, 0]).relabel(["x", "y"])
    assert find_isomorphism(a, b) == {"s0": "y", "s1": "x"}
    assert not isomorphic(a, heralding_coin(0.3, 0.61))
