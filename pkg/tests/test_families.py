import math

import numpy as np
import pytest

from qcausal.families import (
    FlowerParams,
    cycle,
    flower,
    flower_complexity,
    heralding_coin,
    iid,
    label_by_last_symbol,
    load_bias_matrix,
    perturbed_coin,
    spread_biases,
)
from qcausal.machines import statistical_complexity, validate


@pytest.mark.parametrize("make", [perturbed_coin, heralding_coin])
@pytest.mark.parametrize("p, q", [(0.0, 0.5), (0.5, 1.0), (-0.1, 0.5)])
def test_degenerate_parameters_rejected(make, p, q):
    with pytest.raises(ValueError):
        make(p, q)


def test_heralding_forward_stationary():
    p, q = 0.2, 0.6
    assert np.allclose(heralding_coin(p, q).stationary, [q / (p + q), p / (p + q)])


def test_flower_structure():
    m = flower(4, 2)
    assert m.states == ("H", "d1", "d2", "d3", "d4")
    assert m.alphabet == ("1", "2", "3", "4", "5", "6")
    assert np.allclose(m.stationary, [0.5] + [0.125] * 4)
    assert validate(m) == []


@pytest.mark.parametrize("n", [2, 4, 16, 64])
def test_flower_complexity_formula(n):
    assert np.isclose(statistical_complexity(flower(n, 2)), flower_complexity(n), atol=1e-12)


@pytest.mark.parametrize("n, m", [(8, 2), (8, 3), (16, 5)])
def test_spread_biases_are_distinct_distributions(n, m):
    b = spread_biases(n, m)
    assert b.shape == (n, m)
    assert np.allclose(b.sum(axis=1), 1.0)
    FlowerParams(n, m, b)


def test_two_sided_spread():
    assert np.allclose(spread_biases(3, 2)[:, 0], [0.25, 0.5, 0.75])


def test_duplicate_dice_rejected():
    with pytest.raises(ValueError, match="closer"):
        flower(3, 2, np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.9]]))


def test_bias_matrix_from_csv(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text("0.1,0.9\n0.6,0.4\n")
    m = flower(2, 2, load_bias_matrix(path))
    assert np.allclose(m.emission[1, 2:], [0.1, 0.9])


def test_cycle_and_iid():
    assert np.isclose(statistical_complexity(cycle(5)), math.log2(5))
    assert statistical_complexity(iid([0.3, 0.7])) == 0.0
    with pytest.raises(ValueError):
        cycle(0)


def test_label_by_last_symbol_requires_unique_entries():
    with pytest.raises(ValueError):
        label_by_last_symbol(flower(2, 2))
