"""Edge-emitting hidden Markov generators and their classical analysis.

A :class:`UnifilarMachine` stores, for every state, a probability row over
the alphabet and a deterministic successor for each positive-probability
symbol. A :class:`GeneralHMM` stores full symbol-labelled transition matrices
and is used for presentations that are not unifilar, such as edge-reversed
machines before determinization.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from functools import cached_property
from itertools import islice
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._io import atomic_write_text
from .numerics import (
    ReducibleChainError,
    recurrent_classes,
    shannon_entropy,
    stationary_distribution,
)

DEFAULT_CAP = 50_000_000
# Bound on merged mixed states kept per depth; protects memory when beliefs never merge.
DEFAULT_MAX_BELIEFS = 200_000
ROW_TOL = 1e-12
FILE_TOL = 1e-9


class MachineError(ValueError):
    """Raised for malformed machines; ``violations`` lists every problem found."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class EnumerationCapError(RuntimeError):
    """An enumeration grew past its configured cap."""


@dataclass(frozen=True, eq=False)
class UnifilarMachine:
    """Unifilar edge-emitting generator.

    ``emission[i, x]`` is the probability that state ``i`` emits
    ``alphabet[x]``; ``successor[i, x]`` is the state entered on that
    emission, or -1 when the symbol cannot be emitted from ``i``.
    """

    alphabet: tuple[str, ...]
    states: tuple[str, ...]
    emission: np.ndarray
    successor: np.ndarray

    def __post_init__(self):
        alphabet = tuple(str(a) for a in self.alphabet)
        states = tuple(str(s) for s in self.states)
        if len(set(alphabet)) != len(alphabet):
            raise ValueError("duplicate symbols in alphabet")
        if len(set(states)) != len(states):
            raise ValueError("duplicate state labels")
        emission = np.array(self.emission, dtype=float)
        successor = np.array(self.successor, dtype=np.int64)
        shape = (len(states), len(alphabet))
        if emission.shape != shape or successor.shape != shape:
            raise ValueError(f"emission/successor must have shape {shape}")
        if np.any((successor < -1) | (successor >= len(states))):
            raise ValueError("successor index out of range")
        emission.setflags(write=False)
        successor.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "emission", emission)
        object.__setattr__(self, "successor", successor)

    @classmethod
    def from_edges(cls, alphabet: Iterable, states: Iterable, edges: Iterable[tuple]) -> "UnifilarMachine":
        """Build from ``(from_state, symbol, prob, to_state)`` tuples.

        Zero-probability edges are dropped. Raises :class:`MachineError` on
        unknown labels or on two edges sharing a (state, symbol) pair.
        """
        alphabet = tuple(str(a) for a in alphabet)
        states = tuple(str(s) for s in states)
        sidx = {s: i for i, s in enumerate(states)}
        xidx = {a: i for i, a in enumerate(alphabet)}
        emission = np.zeros((len(states), len(alphabet)))
        successor = -np.ones((len(states), len(alphabet)), dtype=np.int64)
        problems = []
        for src, sym, prob, dst in edges:
            src, sym, dst = str(src), str(sym), str(dst)
            if src not in sidx or dst not in sidx:
                problems.append(f"unknown state in edge {src!r} -{sym}-> {dst!r}")
                continue
            if sym not in xidx:
                problems.append(f"unknown symbol {sym!r} in edge from {src!r}")
                continue
            prob = float(prob)
            if prob == 0.0:
                continue
            i, x = sidx[src], xidx[sym]
            if successor[i, x] != -1:
                problems.append(f"non-unifilar: state {src!r} has two edges on symbol {sym!r}")
                continue
            emission[i, x] = prob
            successor[i, x] = sidx[dst]
        if problems:
            raise MachineError(problems)
        return cls(alphabet, states, emission, successor)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_symbols(self) -> int:
        return len(self.alphabet)

    def state_index(self, state) -> int:
        if isinstance(state, (int, np.integer)):
            if not 0 <= state < self.n_states:
                raise IndexError(f"state index {state} out of range")
            return int(state)
        try:
            return self.states.index(str(state))
        except ValueError:
            raise KeyError(f"unknown state {state!r}") from None

    def symbol_index(self, symbol) -> int:
        try:
            return self.alphabet.index(str(symbol))
        except ValueError:
            raise KeyError(f"unknown symbol {symbol!r}") from None

    def word_indices(self, word) -> list[int]:
        """Symbol indices of ``word``.

        A plain string is split into characters when every symbol in the
        alphabet is a single character, otherwise on whitespace.
        """
        if isinstance(word, str):
            if all(len(a) == 1 for a in self.alphabet):
                word = list(word)
            else:
                word = word.split()
        return [self.symbol_index(x) for x in word]

    def edges(self) -> list[tuple[str, str, float, str]]:
        out = []
        for i, s in enumerate(self.states):
            for x, a in enumerate(self.alphabet):
                if self.successor[i, x] >= 0:
                    out.append((s, a, float(self.emission[i, x]), self.states[self.successor[i, x]]))
        return out

    @cached_property
    def symbol_matrices(self) -> np.ndarray:
        """Array of shape (k, n, n) holding T^x[i, j] = P(emit x, go to j | i)."""
        mats = np.zeros((self.n_symbols, self.n_states, self.n_states))
        for i in range(self.n_states):
            for x in range(self.n_symbols):
                j = self.successor[i, x]
                if j >= 0:
                    mats[x, i, j] += self.emission[i, x]
        mats.setflags(write=False)
        return mats

    @cached_property
    def transition_matrix(self) -> np.ndarray:
        t = self.symbol_matrices.sum(axis=0)
        t.setflags(write=False)
        return t

    @cached_property
    def stationary(self) -> np.ndarray:
        pi = stationary_distribution(self.transition_matrix)
        pi.setflags(write=False)
        return pi

    def to_hmm(self) -> "GeneralHMM":
        return GeneralHMM(self.alphabet, self.states, self.symbol_matrices)

    def relabel(self, states: Sequence[str]) -> "UnifilarMachine":
        return UnifilarMachine(self.alphabet, tuple(states), self.emission, self.successor)

    def permute(self, order: Sequence[int]) -> "UnifilarMachine":
        """Reorder states so that new state k is old state ``order[k]``."""
        order = list(order)
        inverse = np.empty(len(order), dtype=np.int64)
        inverse[order] = np.arange(len(order))
        succ = self.successor[order]
        succ = np.where(succ >= 0, inverse[np.clip(succ, 0, None)], -1)
        return UnifilarMachine(self.alphabet, [self.states[k] for k in order], self.emission[order], succ)

    def to_dict(self) -> dict:
        return {
            "alphabet": list(self.alphabet),
            "states": list(self.states),
            "transitions": [
                {"from": s, "symbol": a, "prob": p, "to": t} for s, a, p, t in self.edges()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, tol: float = FILE_TOL) -> "UnifilarMachine":
        """Parse the JSON machine format, checking rows sum to 1 within ``tol``.

        Rows within tolerance are renormalized so the result satisfies the
        tighter in-memory invariant.
        """
        try:
            alphabet = data["alphabet"]
            states = data["states"]
            transitions = data["transitions"]
            edges = [(t["from"], t["symbol"], t["prob"], t["to"]) for t in transitions]
        except (KeyError, TypeError) as exc:
            raise MachineError([f"malformed machine file: missing field {exc}"]) from None
        m = cls.from_edges(alphabet, states, edges)
        rows = m.emission.sum(axis=1)
        bad = [f"row sum: state {s!r} emissions sum to {float(r)!r}" for s, r in zip(m.states, rows) if abs(r - 1.0) > tol]
        if np.any(m.emission < 0):
            bad.append("negative probability")
        if bad:
            raise MachineError(bad)
        return cls(m.alphabet, m.states, m.emission / rows[:, None], m.successor)


@dataclass(frozen=True, eq=False)
class GeneralHMM:
    """Edge-emitting HMM with ``matrices[x, i, j] = P(emit x, go to j | in i)``."""

    alphabet: tuple[str, ...]
    states: tuple[str, ...]
    matrices: np.ndarray

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        shape = (len(self.alphabet), len(self.states), len(self.states))
        if mats.shape != shape:
            raise ValueError(f"matrices must have shape {shape}, got {mats.shape}")
        mats.setflags(write=False)
        object.__setattr__(self, "alphabet", tuple(str(a) for a in self.alphabet))
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        object.__setattr__(self, "matrices", mats)

    @property
    def transition_matrix(self) -> np.ndarray:
        return self.matrices.sum(axis=0)

    def validate(self, tol: float = ROW_TOL) -> list[str]:
        problems = []
        if np.any(self.matrices < 0):
            problems.append("negative probability")
        rows = self.transition_matrix.sum(axis=1)
        for s, r in zip(self.states, rows):
            if abs(r - 1.0) > tol:
                problems.append(f"row sum: state {s!r} sums to {float(r)!r}")
        return problems

    def is_unifilar(self) -> bool:
        return bool(np.all((self.matrices > 0).sum(axis=2) <= 1))

    def word_probability(self, initial, word: Sequence[int]) -> float:
        v = np.asarray(initial, dtype=float)
        for x in word:
            v = v @ self.matrices[x]
        return float(v.sum())


@dataclass
class ExcessEntropyEstimate:
    """Finite-horizon estimates E_L = 2 H(L) - H(2L) for L = 1..horizon."""

    series: list[float]
    converged: bool
    horizon: int

    @property
    def value(self) -> float:
        return self.series[-1] if self.series else 0.0


@dataclass
class MorphTable:
    horizon: int
    morphs: dict[str, dict[tuple[str, ...], float]]

    def distribution(self, state: str, length: int) -> dict[tuple[str, ...], float]:
        return {w: p for w, p in self.morphs[state].items() if len(w) == length}


@dataclass
class ComplexityReport:
    """Classical and q-machine complexities of a process in both directions (bits)."""

    c_mu_forward: float
    c_mu_reverse: float
    d_mu_forward: float
    d_mu_reverse: float
    excess_entropy_estimate: ExcessEntropyEstimate
    cq_bar_forward: float
    cq_bar_reverse: float
    dq_bar_forward: float
    dq_bar_reverse: float
    delta_c_mu: float
    delta_cq_bar: float
    n_states_forward: int = 0
    n_states_reverse: int = 0
    gram_converged: bool = True
    result2_holds: bool = True
    result3_holds: bool = True
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        est = self.excess_entropy_estimate
        d["excess_entropy_estimate"] = {
            "value": est.value,
            "converged": est.converged,
            "horizon": est.horizon,
            "series": list(est.series),
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def load_machine(path) -> UnifilarMachine:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MachineError([f"invalid JSON: {exc}"]) from None
    return UnifilarMachine.from_dict(data)


def machine_json(m: UnifilarMachine) -> str:
    return json.dumps(m.to_dict(), indent=2)


def save_machine(m: UnifilarMachine, path) -> None:
    atomic_write_text(path, machine_json(m) + "\n")


def validate(m: UnifilarMachine, tol: float = ROW_TOL) -> list[str]:
    """List every structural problem of ``m``; an empty list means valid."""
    problems = []
    if np.any(m.emission < 0):
        problems.append("negative probability")
    for i, s in enumerate(m.states):
        row = m.emission[i].sum()
        if abs(row - 1.0) > tol:
            problems.append(f"row sum: state {s!r} emissions sum to {float(row)!r}")
        for x, a in enumerate(m.alphabet):
            has_prob = m.emission[i, x] > 0
            has_succ = m.successor[i, x] >= 0
            if has_prob and not has_succ:
                problems.append(f"dangling successor: state {s!r} emits {a!r} but has no successor")
            elif has_succ and not has_prob:
                problems.append(f"dangling successor: state {s!r} has a successor on zero-probability {a!r}")
    adj = np.zeros((m.n_states, m.n_states))
    for i in range(m.n_states):
        for x in range(m.n_symbols):
            j = m.successor[i, x]
            if j >= 0 and m.emission[i, x] > 0:
                adj[i, j] = 1.0
    classes = recurrent_classes(adj)
    if len(classes) > 1:
        named = [[m.states[k] for k in c] for c in classes]
        problems.append(f"multiple recurrent classes: {named}")
    elif classes:
        for k in sorted(set(range(m.n_states)) - set(classes[0])):
            problems.append(f"unreachable state: {m.states[k]!r} is transient or unreachable")
    return problems


def require_valid(m: UnifilarMachine) -> None:
    problems = validate(m)
    if problems:
        raise MachineError(problems)


def _path_probability(m: UnifilarMachine, i: int, xs: Sequence[int]) -> float:
    prob = 1.0
    for x in xs:
        prob *= m.emission[i, x]
        if prob == 0.0:
            return 0.0
        i = m.successor[i, x]
    return float(prob)


def word_probability(m: UnifilarMachine, start, word) -> float:
    """Probability of emitting ``word`` starting from state ``start``."""
    return _path_probability(m, m.state_index(start), m.word_indices(word))


def stationary_word_probability(m: UnifilarMachine, word) -> float:
    xs = m.word_indices(word)
    return float(sum(p * _path_probability(m, i, xs) for i, p in enumerate(m.stationary) if p > 0))


def iter_conditional_entropies(
    m: UnifilarMachine, cap: float = DEFAULT_CAP, max_beliefs: int = DEFAULT_MAX_BELIEFS
) -> Iterator[float]:
    """Yield next-symbol entropies H(X_t | X_{0:t}) for t = 0, 1, 2, ...

    Words are propagated from the stationary mixture; words that lead to the
    same distribution over states are merged, which leaves every conditional
    entropy exact. Raises :class:`EnumerationCapError` before a depth whose
    positive-probability word count would exceed ``cap``, or when more than
    ``max_beliefs`` distinct state distributions remain after merging.
    """
    mats = m.symbol_matrices
    beliefs = np.asarray(m.stationary, dtype=float)[None, :]
    weights = np.ones(1)
    words = np.ones(1)
    while True:
        v = np.einsum("rn,knm->rkm", beliefs, mats)
        px = v.sum(axis=2)
        safe = np.where(px > 0, px, 1.0)
        yield float(-(weights[:, None] * np.where(px > 0, px * np.log2(safe), 0.0)).sum())
        rr, kk = np.nonzero(px > 0)
        projected = float(words[rr].sum())
        if projected > cap:
            raise EnumerationCapError(f"{projected:.3g} positive-probability words exceed the cap of {cap:g}")
        new_b = v[rr, kk] / px[rr, kk][:, None]
        new_w = weights[rr] * px[rr, kk]
        _, first, inverse = np.unique(np.round(new_b, 12), axis=0, return_index=True, return_inverse=True)
        if len(first) > max_beliefs:
            raise EnumerationCapError(f"{len(first)} distinct mixed states exceed the limit of {max_beliefs}")
        inverse = inverse.reshape(-1)
        beliefs = new_b[first]
        weights = np.bincount(inverse, weights=new_w, minlength=len(first))
        words = np.bincount(inverse, weights=words[rr], minlength=len(first))


def block_entropy(m: UnifilarMachine, length: int, cap: float = DEFAULT_CAP) -> float:
    """Block entropy H(X_{0:L}) of the stationary process, in bits."""
    if length < 0:
        raise ValueError("length must be nonnegative")
    return float(sum(islice(iter_conditional_entropies(m, cap), length)))


def excess_entropy_estimate(
    m: UnifilarMachine, max_horizon: int = 12, tol: float = 1e-6, cap: float = DEFAULT_CAP
) -> ExcessEntropyEstimate:
    """Estimate the excess entropy by E_L = 2 H(L) - H(2L).

    Stops at the first L with |E_L - E_{L-1}| < tol. When the enumeration cap
    is hit the partial series is returned with ``converged`` false.
    """
    if max_horizon < 1:
        raise ValueError("max_horizon must be at least 1")
    stream = iter_conditional_entropies(m, cap)
    cum = [0.0]
    series: list[float] = []
    for L in range(1, max_horizon + 1):
        try:
            while len(cum) <= 2 * L:
                cum.append(cum[-1] + next(stream))
        except EnumerationCapError:
            return ExcessEntropyEstimate(series, False, L - 1)
        series.append(2 * cum[L] - cum[2 * L])
        if L > 1 and abs(series[-1] - series[-2]) < tol:
            return ExcessEntropyEstimate(series, True, L)
    return ExcessEntropyEstimate(series, False, max_horizon)


def statistical_complexity(m: UnifilarMachine) -> float:
    """Entropy of the stationary distribution over the machine's states."""
    return shannon_entropy(m.stationary)


def topological_complexity(m: UnifilarMachine) -> float:
    return math.log2(m.n_states)


def future_morphs(m: UnifilarMachine, horizon: int, cap: float = DEFAULT_CAP) -> MorphTable:
    """Exact conditional word distributions of every state for lengths 0..horizon."""
    morphs = {}
    total = 0
    for i, s in enumerate(m.states):
        table = {(): 1.0}
        frontier = [((), i, 1.0)]
        for _ in range(horizon):
            nxt = []
            for word, j, p in frontier:
                for x in np.flatnonzero(m.emission[j] > 0):
                    w = word + (m.alphabet[x],)
                    q = p * m.emission[j, x]
                    table[w] = q
                    nxt.append((w, m.successor[j, x], q))
            total += len(nxt)
            if total > cap:
                raise EnumerationCapError(f"morph enumeration exceeded the cap of {cap:g} words")
            frontier = nxt
        morphs[s] = table
    return MorphTable(horizon, morphs)


def morph_fidelity_matrix(m: UnifilarMachine, horizon: int) -> np.ndarray:
    """Fidelities F_ij(l) between future morphs for l = 1..horizon.

    Returns an array of shape (horizon, n, n). Because the machine is
    unifilar, each word drives a pair of states along a unique pair path, so
    F(l)_ij = sum_x sqrt(T_i^x T_j^x) F(l-1)_{succ(i,x), succ(j,x)} with
    F(0) = 1.
    """
    n = m.n_states
    amp = np.sqrt(m.emission)
    succ = np.clip(m.successor, 0, None)
    f = np.ones((n, n))
    out = []
    for _ in range(horizon):
        g = np.zeros((n, n))
        for x in range(m.n_symbols):
            w = np.outer(amp[:, x], amp[:, x])
            g += w * f[np.ix_(succ[:, x], succ[:, x])]
        f = np.minimum(g, 1.0)
        out.append(f)
    return np.array(out) if out else np.zeros((0, n, n))


def morph_fidelity(m: UnifilarMachine, i, j, horizon: int) -> tuple[float, list[float]]:
    """Fidelity F_ij at ``horizon`` together with its values for l = 1..horizon."""
    a, b = m.state_index(i), m.state_index(j)
    seq = [float(f[a, b]) for f in morph_fidelity_matrix(m, horizon)]
    return (seq[-1] if seq else 1.0), seq


def _partition_by_rows(rows: np.ndarray, tol: float) -> list[int]:
    """Block id per row; a row joins the first earlier block whose representative is within ``tol``."""
    reps = np.empty_like(rows)
    n_reps = 0
    block = []
    for row in rows:
        hit = np.flatnonzero(np.max(np.abs(reps[:n_reps] - row), axis=1) <= tol)
        if hit.size:
            block.append(int(hit[0]))
        else:
            reps[n_reps] = row
            block.append(n_reps)
            n_reps += 1
    return block


def minimize(m: UnifilarMachine, tol: float = 1e-9, horizon: int = 12) -> UnifilarMachine:
    """Merge states with identical futures (Moore partition refinement).

    Blocks start from emission rows equal within ``tol`` and are split until
    all members agree on the block of every successor. Each block keeps the
    label of its first-listed state. The result is checked by walking state
    pairs up to ``horizon`` steps and confirming that their emission rows
    agree.
    """
    block = _partition_by_rows(m.emission, tol)
    while True:
        sigs: dict[tuple, int] = {}
        new_block = []
        for i in range(m.n_states):
            sig = (block[i],) + tuple(block[j] if j >= 0 else -1 for j in m.successor[i])
            new_block.append(sigs.setdefault(sig, len(sigs)))
        if len(sigs) == len(set(block)):
            block = new_block
            break
        block = new_block

    n_blocks = max(block) + 1
    reps = [block.index(b) for b in range(n_blocks)]
    successor = np.array(
        [[block[j] if j >= 0 else -1 for j in m.successor[r]] for r in reps], dtype=np.int64
    )
    quotient = UnifilarMachine(m.alphabet, [m.states[r] for r in reps], m.emission[reps], successor)

    for i in range(m.n_states):
        r = reps[block[i]]
        if r != i:
            _check_agreement(m, i, r, horizon, 2 * tol)
    return quotient


def _check_agreement(m: UnifilarMachine, i: int, j: int, horizon: int, tol: float) -> None:
    seen = {(i, j)}
    frontier = [(i, j)]
    for _ in range(horizon):
        nxt = []
        for a, b in frontier:
            if np.max(np.abs(m.emission[a] - m.emission[b])) > tol:
                raise RuntimeError(f"minimize merged states {m.states[i]!r} and {m.states[j]!r} with different futures")
            for x in np.flatnonzero(m.emission[a] > 0):
                pair = (int(m.successor[a, x]), int(m.successor[b, x]))
                if pair not in seen:
                    seen.add(pair)
                    nxt.append(pair)
        frontier = nxt


def find_isomorphism(a: UnifilarMachine, b: UnifilarMachine, tol: float = 1e-9) -> dict[str, str] | None:
    """State bijection a -> b preserving symbols, probabilities and successors.

    Symbols are matched by name. Returns None when no isomorphism exists.
    Every state of ``a`` must be reachable from its first state.
    """
    if set(a.alphabet) != set(b.alphabet) or a.n_states != b.n_states:
        return None
    xmap = [b.symbol_index(s) for s in a.alphabet]
    for start in range(b.n_states):
        mapping = {0: start}
        queue = deque([0])
        ok = True
        while queue and ok:
            i = queue.popleft()
            j = mapping[i]
            if np.max(np.abs(a.emission[i] - b.emission[j, xmap])) > tol:
                ok = False
                break
            for x in range(a.n_symbols):
                si, sj = a.successor[i, x], b.successor[j, xmap[x]]
                if (si >= 0) != (sj >= 0):
                    ok = False
                    break
                if si < 0:
                    continue
                if si in mapping:
                    if mapping[si] != sj:
                        ok = False
                        break
                else:
                    mapping[si] = sj
                    queue.append(si)
        if ok and len(mapping) == a.n_states and len(set(mapping.values())) == a.n_states:
            return {a.states[i]: b.states[j] for i, j in mapping.items()}
    return None


def isomorphic(a: UnifilarMachine, b: UnifilarMachine, tol: float = 1e-9) -> bool:
    return find_isomorphism(a, b, tol) is not None


__all__ = [
    "ComplexityReport",
    "DEFAULT_CAP",
    "EnumerationCapError",
    "ExcessEntropyEstimate",
    "GeneralHMM",
    "MachineError",
    "MorphTable",
    "ReducibleChainError",
    "UnifilarMachine",
    "block_entropy",
    "iter_conditional_entropies",
    "excess_entropy_estimate",
    "find_isomorphism",
    "future_morphs",
    "isomorphic",
    "load_machine",
    "machine_json",
    "minimize",
    "morph_fidelity",
    "morph_fidelity_matrix",
    "require_valid",
    "save_machine",
    "stationary_word_probability",
    "statistical_complexity",
    "topological_complexity",
    "validate",
    "word_probability",
]
