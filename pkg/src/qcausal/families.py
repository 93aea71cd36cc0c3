"""Closed-form generators for the processes studied here."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .machines import UnifilarMachine

FLOWER_MIN_GAP = 1e-3


def _check_open_unit(**params: float) -> None:
    for name, value in params.items():
        if not 0.0 < value < 1.0:
            raise ValueError(f"{name} must lie strictly between 0 and 1, got {value!r}")


@dataclass(frozen=True)
class HeraldingParams:
    p: float
    q: float

    def __post_init__(self):
        _check_open_unit(p=self.p, q=self.q)


@dataclass(frozen=True, eq=False)
class FlowerParams:
    """Dice biases for the n-m flower: ``biases[i, j]`` is P(die i shows side j)."""

    n: int
    m: int
    biases: np.ndarray
    min_gap: float = FLOWER_MIN_GAP

    def __post_init__(self):
        b = np.asarray(self.biases, dtype=float)
        if self.n < 2 or self.m < 2:
            raise ValueError("flower needs n >= 2 dice with m >= 2 sides")
        if b.shape != (self.n, self.m):
            raise ValueError(f"bias matrix must be {self.n} x {self.m}, got {b.shape}")
        if np.any(b < 0) or np.max(np.abs(b.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("every bias row must be a probability vector")
        for i in range(self.n):
            gaps = np.max(np.abs(b[i + 1:] - b[i]), axis=1)
            if gaps.size and gaps.min() < self.min_gap:
                k = i + 1 + int(np.argmin(gaps))
                raise ValueError(f"dice {i + 1} and {k + 1} have bias rows closer than {self.min_gap}")
        object.__setattr__(self, "biases", b)


def perturbed_coin(p: float, q: float) -> UnifilarMachine:
    """Coin that flips with probability p from 0 and q from 1, emitting its face."""
    _check_open_unit(p=p, q=q)
    return UnifilarMachine.from_edges(
        ["0", "1"],
        ["s0", "s1"],
        [
            ("s0", "0", 1 - p, "s0"),
            ("s0", "1", p, "s1"),
            ("s1", "0", q, "s0"),
            ("s1", "1", 1 - q, "s1"),
        ],
    )


def heralding_coin(p: float, q: float) -> UnifilarMachine:
    """Perturbed coin whose first 0 of each run of 0s is replaced by 2.

    ``s1`` holds pasts ending in 1; ``s0`` holds pasts ending in 0 or 2.
    """
    _check_open_unit(p=p, q=q)
    return UnifilarMachine.from_edges(
        ["0", "1", "2"],
        ["s0", "s1"],
        [
            ("s0", "0", 1 - p, "s0"),
            ("s0", "1", p, "s1"),
            ("s1", "2", q, "s0"),
            ("s1", "1", 1 - q, "s1"),
        ],
    )


def label_by_last_symbol(m: UnifilarMachine) -> UnifilarMachine:
    """Rename states ``s<x>`` after the unique symbol entering them, sorted by symbol."""
    incoming: dict[int, set[int]] = {i: set() for i in range(m.n_states)}
    for i in range(m.n_states):
        for x in range(m.n_symbols):
            j = m.successor[i, x]
            if j >= 0:
                incoming[int(j)].add(x)
    if any(len(v) != 1 for v in incoming.values()):
        raise ValueError("states are not determined by the last emitted symbol")
    order = sorted(range(m.n_states), key=lambda i: next(iter(incoming[i])))
    permuted = m.permute(order)
    return permuted.relabel([f"s{m.alphabet[next(iter(incoming[i]))]}" for i in order])


def heralding_coin_reverse(p: float, q: float) -> UnifilarMachine:
    """Reverse epsilon-machine of the heralding coin, states named by last symbol."""
    from .reversal import reverse_epsilon_machine

    return label_by_last_symbol(reverse_epsilon_machine(heralding_coin(p, q)))


def spread_biases(n: int, m: int) -> np.ndarray:
    """Default dice biases.

    For two-sided dice, die i lands on side 1 with probability i / (n + 1).
    For m >= 3 the weight of side j on die i is 1 + frac(i * a_j) with
    a_j the fractional part of sqrt of the j-th prime (a Kronecker sequence),
    and each row is normalized.
    """
    if m == 2:
        first = np.arange(1, n + 1) / (n + 1)
        return np.column_stack([first, 1 - first])
    primes = _first_primes(m)
    alphas = np.sqrt(primes) % 1.0
    i = np.arange(1, n + 1)[:, None]
    w = 1.0 + (i * alphas[None, :]) % 1.0
    return w / w.sum(axis=1, keepdims=True)


def _first_primes(k: int) -> np.ndarray:
    out: list[int] = []
    c = 2
    while len(out) < k:
        if all(c % d for d in out if d * d <= c):
            out.append(c)
        c += 1
    return np.array(out, dtype=float)


def load_bias_matrix(path) -> np.ndarray:
    """Read an n x m bias matrix from a CSV file with one die per row."""
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def flower(n: int, m: int, biases=None) -> UnifilarMachine:
    """The n-m flower: a hub picks one of n biased m-sided dice, then it is rolled.

    The hub ``H`` emits die label ``i`` (1..n) uniformly and moves to ``d<i>``;
    die state ``d<i>`` emits ``n + j`` with probability biases[i-1, j-1] and
    returns to the hub. ``biases`` may be a matrix or "spread" (the default).
    """
    if biases is None or (isinstance(biases, str) and biases == "spread"):
        biases = spread_biases(n, m)
    params = FlowerParams(n, m, biases)
    dice = [str(i) for i in range(1, n + 1)]
    sides = [str(n + j) for j in range(1, m + 1)]
    states = ["H"] + [f"d{i}" for i in range(1, n + 1)]
    edges = [("H", dice[i], 1.0 / n, f"d{i + 1}") for i in range(n)]
    for i in range(n):
        for j in range(m):
            edges.append((f"d{i + 1}", sides[j], params.biases[i, j], "H"))
    return UnifilarMachine.from_edges(dice + sides, states, edges)


def cycle(k: int) -> UnifilarMachine:
    """Deterministic period-k process: state t emits t and moves to t + 1 mod k."""
    if k < 1:
        raise ValueError("cycle length must be at least 1")
    return UnifilarMachine.from_edges(
        [str(t) for t in range(k)],
        [f"c{t}" for t in range(k)],
        [(f"c{t}", str(t), 1.0, f"c{(t + 1) % k}") for t in range(k)],
    )


def iid(probs, symbols=None) -> UnifilarMachine:
    """Single-state i.i.d. source."""
    probs = np.asarray(probs, dtype=float)
    symbols = [str(s) for s in (symbols if symbols is not None else range(len(probs)))]
    return UnifilarMachine.from_edges(symbols, ["s"], [("s", a, p, "s") for a, p in zip(symbols, probs)])


def flower_complexity(n: int) -> float:
    """Closed-form forward statistical complexity 1 + log2(n) / 2 of any n-m flower."""
    return 1.0 + 0.5 * math.log2(n)
