import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qcausal.numerics import (
    ConvergenceError,
    ReducibleChainError,
    binary_entropy,
    hermitian_eigenvalues,
    majorizes,
    shannon_entropy,
    stationary_distribution,
    symmetric_eigenvalues,
    symmetric_eigh,
    von_neumann_entropy,
)


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.25, 0.8112781244591328)])
def test_binary_entropy_values(x, expected):
    assert np.isclose(binary_entropy(x), expected, atol=1e-15)


def test_binary_entropy_rejects_out_of_range():
    with pytest.raises(ValueError):
        binary_entropy(1.1)


def test_shannon_entropy_uniform():
    assert np.isclose(shannon_entropy(np.full(8, 1 / 8)), 3.0)


def test_shannon_entropy_rejects_non_distribution():
    with pytest.raises(ValueError):
        shannon_entropy([0.5, 0.6])


def test_eigenvalues_of_diagonal_matrix_are_sorted_diagonal():
    assert np.allclose(symmetric_eigenvalues(np.diag([0.2, 3.0, -1.0])), [3.0, 0.2, -1.0])


def test_two_by_two_closed_form():
    a, b, c = 0.3, 0.7, 0.2
    mean, rad = (a + c) / 2, math.hypot((a - c) / 2, b)
    assert np.allclose(symmetric_eigenvalues([[a, b], [b, c]]), [mean + rad, mean - rad], atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.floats(-10, 10)))
def test_jacobi_matches_lapack(raw):
    n = min(raw.shape)
    a = raw[:n, :n]
    a = a + a.T
    assert np.allclose(symmetric_eigenvalues(a), np.linalg.eigvalsh(a)[::-1], atol=1e-10 * max(1.0, np.abs(a).max()))


def test_eigenvectors_diagonalize(rng):
    a = rng.normal(size=(6, 6))
    a = a + a.T
    w, v = symmetric_eigh(a)
    assert np.allclose(v.T @ v, np.eye(6), atol=1e-12)
    assert np.allclose(a @ v, v * w, atol=1e-11)


def test_batched_equals_one_at_a_time(rng):
    stack = rng.normal(size=(5, 4, 4))
    stack = stack + np.swapaxes(stack, 1, 2)
    batched = symmetric_eigenvalues(stack)
    assert batched.shape == (5, 4)
    for k in range(5):
        assert np.allclose(batched[k], symmetric_eigenvalues(stack[k]), atol=1e-13)


def test_sweep_cap_raises():
    with pytest.raises(ConvergenceError):
        symmetric_eigenvalues([[1.0, 0.5], [0.5, 2.0]], max_sweeps=0)


def test_rejects_asymmetric():
    with pytest.raises(ValueError):
        symmetric_eigenvalues([[1.0, 2.0], [0.0, 1.0]])


def test_hermitian_matches_lapack(rng):
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = h + h.conj().T
    assert np.allclose(hermitian_eigenvalues(h), np.linalg.eigvalsh(h)[::-1], atol=1e-12)


def test_von_neumann_entropy_clamps_tiny_negatives():
    assert np.isclose(von_neumann_entropy([0.5, 0.5, -1e-12]), 1.0)


@pytest.mark.parametrize("bad", [[0.6, 0.6], [1.1, -0.1]])
def test_von_neumann_entropy_rejects_invalid(bad):
    with pytest.raises(ValueError):
        von_neumann_entropy(bad)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([1.0, 0.0], [0.5, 0.5], True),
        ([0.5, 0.5], [1.0, 0.0], False),
        ([0.6, 0.4], [0.6, 0.3, 0.1], True),
        ([0.5, 0.3, 0.2], [0.5, 0.3, 0.2], True),
    ],
)
def test_majorizes(a, b, expected):
    assert majorizes(a, b) is expected


def test_majorizes_rejects_unequal_totals():
    with pytest.raises(ValueError):
        majorizes([1.0], [0.5])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6), st.integers(0, 1000))
def test_majorization_implies_entropy_order(weights, seed):
    """Mixing a distribution with a doubly stochastic matrix is majorized by it."""
    p = np.sort(np.array(weights) / sum(weights))[::-1]
    n = len(p)
    r = np.random.default_rng(seed)
    perms = [np.eye(n)[r.permutation(n)] for _ in range(3)]
    c = r.dirichlet(np.ones(3))
    d = sum(ci * pm for ci, pm in zip(c, perms))
    q = np.sort(p @ d)[::-1]
    assert majorizes(p, q)
    assert von_neumann_entropy(p) <= von_neumann_entropy(q) + 1e-12


def test_stationary_two_state():
    t = np.array([[0.7, 0.3], [0.6, 0.4]])
    assert np.allclose(stationary_distribution(t), [2 / 3, 1 / 3])


def test_stationary_periodic_chain():
    t = np.roll(np.eye(4), 1, axis=1)
    assert np.allclose(stationary_distribution(t), np.full(4, 0.25))


def test_stationary_reducible_chain_raises():
    t = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.0, 0.5]])
    with pytest.raises(ReducibleChainError) as err:
        stationary_distribution(t)
    assert len(err.value.classes) == 2


def test_stationary_transient_state_gets_zero():
    t = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]])
    assert np.allclose(stationary_distribution(t), [0.5, 0.5, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 7), st.integers(0, 10_000))
def test_stationary_is_fixed_point(n, seed):
    t = np.random.default_rng(seed).dirichlet(np.ones(n), size=n)
    pi = stationary_distribution(t)
    assert np.isclose(pi.sum(), 1.0)
    assert np.allclose(pi @ t, pi, atol=1e-12)


def test_large_matrices_use_lapack(rng):
    a = rng.normal(size=(300, 300))
    a = a + a.T
    w, v = symmetric_eigh(a)
    assert np.allclose(w, np.linalg.eigvalsh(a)[::-1])
    assert np.allclose(a @ v, v * w, atol=1e-9)
