import itertools
import math

import numpy as np
import pytest

from qcausal.families import cycle, flower, heralding_coin, heralding_coin_reverse, perturbed_coin
from qcausal.machines import stationary_word_probability, word_probability
from qcausal.simulator import (
    IsometryError,
    build_step_operator,
    exact_word_distribution,
    format_distribution_csv,
    heralding_forward_circuit,
    heralding_retro_circuit,
    machine_digest,
    machine_word_distribution,
    memory_embedding,
    model_residual,
    read_trajectory,
    retro_circuit_gates,
    sample_trajectory,
    stationary_word_distribution,
    total_variation,
    unitarity_residual,
    window_distribution,
    write_trajectory,
)
from qcausal.spectral import gram_fixed_point

FAMILY = [heralding_coin(0.5, 0.5), heralding_coin(0.2, 0.7), perturbed_coin(0.3, 0.6), flower(4, 3), cycle(3)]


def test_identity_gram_gives_standard_basis():
    assert np.allclose(memory_embedding(np.eye(3)), np.eye(3))


def test_heralding_embedding_angle():
    e = memory_embedding(gram_fixed_point(heralding_coin(0.5, 0.5)))
    assert e.shape == (2, 2)
    assert np.isclose(e[0] @ e[1], 0.5)


def test_flower_embedding_fits_three_dimensions():
    m = flower(64, 2)
    g = gram_fixed_point(m)
    e = memory_embedding(g)
    assert e.shape[0] == 65 and e.shape[1] <= 3
    assert np.allclose(e @ e.T, g.matrix, atol=1e-9)


def test_embedding_rejects_indefinite_matrix():
    with pytest.raises(ValueError, match="positive semidefinite"):
        memory_embedding(np.array([[1.0, 2.0], [2.0, 1.0]]))


@pytest.mark.parametrize("m", FAMILY)
def test_dilation_is_unitary_and_models_machine(m):
    op = build_step_operator(m)
    assert unitarity_residual(op) < 1e-9
    assert model_residual(op, m) < 1e-9


def test_cycle_operator_is_a_permutation():
    u = build_step_operator(cycle(3)).unitary
    assert np.allclose(np.abs(u), np.round(np.abs(u)))


def test_perturbed_coin_memory_is_a_qubit():
    assert build_step_operator(perturbed_coin(0.3, 0.4)).memory_dim == 2


def test_wrong_embedding_is_rejected():
    with pytest.raises(IsometryError):
        build_step_operator(heralding_coin(0.5, 0.5), np.eye(2))


@pytest.mark.parametrize("m", FAMILY)
def test_memory_follows_machine_state(m):
    op = build_step_operator(m)
    for i in range(m.n_states):
        for sym, prob, post in op.branches(op.memory_states[i]):
            x = m.symbol_index(sym)
            assert np.isclose(prob, m.emission[i, x])
            assert np.allclose(post, op.memory_states[m.successor[i, x]], atol=1e-9)


@pytest.mark.parametrize("m", FAMILY)
def test_branch_propagation_matches_path_probabilities(m):
    op = build_step_operator(m)
    for s in m.states:
        for L in (1, 4):
            dist = exact_word_distribution(op, s, L)
            assert np.isclose(sum(dist.values()), 1.0)
            for w in itertools.product(m.alphabet, repeat=L):
                assert np.isclose(dist.get(w, 0.0), word_probability(m, s, list(w)), atol=1e-9)


def test_exact_distribution_examples():
    op = build_step_operator(heralding_coin(0.5, 0.5))
    d = exact_word_distribution(op, "s1", 1)
    assert d.keys() == {("1",), ("2",)} and np.allclose(list(d.values()), 0.5)
    assert exact_word_distribution(build_step_operator(cycle(3)), 0, 3) == pytest.approx({("0", "1", "2"): 1.0})


def test_word_length_must_be_positive():
    with pytest.raises(ValueError):
        exact_word_distribution(build_step_operator(cycle(2)), 0, 0)


def test_machine_word_distribution_oracle():
    m = heralding_coin(0.3, 0.6)
    d = machine_word_distribution(m, 3)
    for w, p in d.items():
        assert np.isclose(p, stationary_word_probability(m, list(w)))


def test_sampling_is_reproducible():
    op = build_step_operator(heralding_coin(0.4, 0.6))
    a = sample_trajectory(op, None, 2000, seed=11)
    assert a == sample_trajectory(op, None, 2000, seed=11)
    assert a != sample_trajectory(op, None, 2000, seed=12)


def test_cycle_sampling_is_periodic():
    op = build_step_operator(cycle(3))
    for seed in (0, 1, 2):
        assert sample_trajectory(op, "c1", 7, seed) == list("1201201")


def test_short_run_window_statistics():
    m = perturbed_coin(0.3, 0.6)
    op = build_step_operator(m)
    traj = sample_trajectory(op, None, 50_000, seed=5)
    tv = total_variation(window_distribution(traj, 3), machine_word_distribution(m, 3))
    assert tv < 3 / math.sqrt(50_000)


def test_forward_circuit_overlap():
    p, q = 0.3, 0.8
    op = heralding_forward_circuit(p, q)
    assert (op.memory_dim, op.output_dim) == (2, 3)
    e = op.memory_states
    assert np.isclose(e[0] @ e[1], math.sqrt(p * (1 - q)))
    assert model_residual(op, heralding_coin(p, q)) < 1e-9


def test_retro_memory_states():
    op = heralding_retro_circuit(0.5, 0.5)
    e = op.memory_states
    assert np.isclose(e[0] @ e[2], 0.0)
    assert np.isclose(e[0] @ e[1], math.sqrt(0.5))


def brute_retro_step(p, q, memory):
    """Run the three gates on |m>_a|0>_b|0>_c as an 8-vector and read (a, b) -> symbol, c -> memory."""
    state = np.kron(np.kron(memory, [1.0, 0.0]), [1.0, 0.0])
    out = retro_circuit_gates(p, q) @ state
    table = {}
    for a, b, sym in ((0, 0, "0"), (1, 0, "1"), (0, 1, "2")):
        amp = out[[4 * a + 2 * b, 4 * a + 2 * b + 1]]
        table[sym] = float(amp @ amp)
    assert np.isclose(out[6] ** 2 + out[7] ** 2, 0.0)
    return table


@pytest.mark.parametrize("p, q", [(0.5, 0.5), (0.2, 0.6)])
def test_retro_gates_reproduce_reverse_rows(p, q):
    rev = heralding_coin_reverse(p, q)
    states = heralding_retro_circuit(p, q).memory_states
    for i, s in enumerate(rev.states):
        got = brute_retro_step(p, q, states[i])
        for x, sym in enumerate(rev.alphabet):
            assert np.isclose(got[sym], rev.emission[i, x], atol=1e-12)


@pytest.mark.parametrize("p, q", [(0.5, 0.5), (0.25, 0.65)])
def test_retro_circuit_generates_reversed_process(p, q):
    op = heralding_retro_circuit(p, q)
    fwd = heralding_coin(p, q)
    assert unitarity_residual(op) < 1e-9
    assert model_residual(op, heralding_coin_reverse(p, q)) < 1e-9
    for L in range(1, 7):
        for w, prob in stationary_word_distribution(op, L).items():
            assert np.isclose(prob, stationary_word_probability(fwd, list(w[::-1])), atol=1e-9)


def test_forward_circuit_matches_generic_dilation():
    m = heralding_coin(0.35, 0.45)
    a = stationary_word_distribution(heralding_forward_circuit(0.35, 0.45), 5)
    b = stationary_word_distribution(build_step_operator(m), 5)
    assert total_variation(a, b) < 1e-9


def test_trajectory_file_round_trip(tmp_path):
    m = heralding_coin(0.5, 0.5)
    traj = sample_trajectory(build_step_operator(m), None, 20, seed=4)
    path = tmp_path / "t.txt"
    write_trajectory(path, traj, machine_digest(m), 4)
    meta, symbols = read_trajectory(path)
    assert symbols == traj
    assert meta == {"machine-sha256": machine_digest(m), "seed": "4", "length": "20"}


def test_distribution_csv():
    text = format_distribution_csv({("1", "0"): 0.25, ("0", "0"): 0.75})
    assert text.splitlines() == ["word,probability", "00,0.75", "10,0.25"]
