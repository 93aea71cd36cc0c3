"""Statevector generation of processes by a unitary acting on memory and output.

The composite register is memory (dimension d) tensor output (dimension k),
with basis index ``memory * k + output``. Each step prepares the output in
its first basis state (the blank), applies the unitary and measures the
output in the computational basis; the memory is kept.
"""
from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._io import atomic_write_text
from .families import HeraldingParams, heralding_coin, heralding_coin_reverse
from .machines import UnifilarMachine, machine_json
from .numerics import symmetric_eigh
from .optimality import optimal_forward_states, optimal_retro_states
from .spectral import RANK_TOL, GramMatrix, gram_fixed_point

ISOMETRY_TOL = 1e-9
BRANCH_FLOOR = 1e-15


class IsometryError(ValueError):
    """The requested step map does not preserve inner products."""


def memory_embedding(g: GramMatrix | np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Real unit vectors |S_i> with <S_i|S_j> = G_ij, one per row.

    G = V diag(w) V^T is factored keeping eigenvalues above ``rank_tol``, so
    the vectors live in dimension equal to the numerical rank of G. Each
    eigenvector's sign is fixed so its largest-magnitude entry is positive.
    """
    if isinstance(g, GramMatrix):
        if not g.converged:
            raise ValueError("overlap matrix has not converged")
        g = g.matrix
    g = np.asarray(g, dtype=float)
    w, v = symmetric_eigh(g)
    if w[-1] < -1e-9:
        raise ValueError(f"overlap matrix is not positive semidefinite (eigenvalue {w[-1]:.3g})")
    keep = w > rank_tol
    w, v = w[keep], v[:, keep]
    lead = np.argmax(np.abs(v), axis=0)
    v = v * np.sign(v[lead, np.arange(v.shape[1])])
    vecs = v * np.sqrt(w)[None, :]
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class StepOperator:
    """Unitary on memory (x) output plus the bookkeeping needed to read it.

    ``outcome_symbols[k]`` is the symbol reported when output basis state k
    is observed; ``None`` marks basis states that should never occur.
    ``memory_states[i]`` is the memory vector of machine state ``state_labels[i]``.
    """

    unitary: np.ndarray
    memory_dim: int
    output_dim: int
    outcome_symbols: tuple
    memory_states: np.ndarray
    state_labels: tuple
    stationary: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        dim = self.memory_dim * self.output_dim
        if self.unitary.shape != (dim, dim):
            raise ValueError(f"unitary must be {dim} x {dim}, got {self.unitary.shape}")
        if len(self.outcome_symbols) != self.output_dim:
            raise ValueError("need one outcome symbol entry per output basis state")

    def memory_vector(self, state) -> np.ndarray:
        if isinstance(state, str):
            state = self.state_labels.index(state)
        return self.memory_states[int(state)]

    def branches(self, memory: np.ndarray) -> list[tuple[object, float, np.ndarray]]:
        """(symbol, probability, normalized post-measurement memory) per nonzero outcome."""
        cols = self.unitary[:, :: self.output_dim]
        out = (cols @ memory).reshape(self.memory_dim, self.output_dim)
        result = []
        for k in range(self.output_dim):
            amp = out[:, k]
            prob = float(np.vdot(amp, amp).real)
            if prob <= BRANCH_FLOOR:
                continue
            sym = self.outcome_symbols[k]
            if sym is None:
                raise RuntimeError(f"unused output basis state {k} observed with probability {prob:.3g}")
            result.append((sym, prob, amp / math.sqrt(prob)))
        return result


def _complete_unitary(isometry: np.ndarray, columns: Sequence[int]) -> np.ndarray:
    """Place ``isometry`` columns at ``columns`` and fill the rest with an
    orthonormal completion by Gram-Schmidt over standard basis vectors in index order."""
    dim = isometry.shape[0]
    basis = [isometry[:, a] for a in range(isometry.shape[1])]
    extra = []
    for e in range(dim):
        if len(basis) + len(extra) == dim:
            break
        v = np.zeros(dim, dtype=isometry.dtype)
        v[e] = 1.0
        for _ in range(2):
            for u in basis + extra:
                v = v - u * np.vdot(u, v)
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            extra.append(v / norm)
    u = np.zeros((dim, dim), dtype=isometry.dtype)
    used = set(columns)
    for a, c in enumerate(columns):
        u[:, c] = isometry[:, a]
    free = [c for c in range(dim) if c not in used]
    for c, v in zip(free, extra):
        u[:, c] = v
    return u


def target_states(m: UnifilarMachine, embedding: np.ndarray, outcome_index: Sequence[int], output_dim: int) -> np.ndarray:
    """Columns sum_x sqrt(T_i^x) |S_succ(i,x)> (x) |x> for every state i."""
    d = embedding.shape[1]
    phi = np.zeros((d * output_dim, m.n_states))
    for i in range(m.n_states):
        for x in range(m.n_symbols):
            j = m.successor[i, x]
            if j < 0 or m.emission[i, x] <= 0:
                continue
            phi[outcome_index[x] :: output_dim, i] += math.sqrt(m.emission[i, x]) * embedding[j]
    return phi


def build_step_operator(m: UnifilarMachine, embedding: np.ndarray | None = None) -> StepOperator:
    """Unitary dilation of the q-machine step for ``m``.

    The map |S_i> (x) |blank> -> sum_x sqrt(T_i^x) |S_succ(i,x)> (x) |x> is
    inner-product preserving exactly when the embedding overlaps solve the
    overlap fixed point, so it extends to an isometry on the memory space,
    which is then completed to a unitary.
    """
    if embedding is None:
        embedding = memory_embedding(gram_fixed_point(m))
    embedding = np.asarray(embedding, dtype=float)
    if embedding.shape[0] != m.n_states:
        raise ValueError("embedding needs one vector per machine state")
    d, k = embedding.shape[1], m.n_symbols
    phi = target_states(m, embedding, range(k), k)
    iso = phi @ np.linalg.pinv(embedding.T)
    err = max(
        np.max(np.abs(iso @ embedding.T - phi)),
        np.max(np.abs(iso.T @ iso - np.eye(d))),
    )
    if err > ISOMETRY_TOL:
        raise IsometryError(f"step map violates isometry by {err:.3g}; the overlap matrix may be unconverged")
    u = _complete_unitary(iso, [a * k for a in range(d)])
    return StepOperator(u, d, k, tuple(m.alphabet), embedding, tuple(m.states), np.asarray(m.stationary))


def unitarity_residual(op: StepOperator) -> float:
    u = op.unitary
    return float(np.max(np.abs(np.conj(u.T) @ u - np.eye(u.shape[0]))))


def model_residual(op: StepOperator, m: UnifilarMachine) -> float:
    """Largest deviation of U(|S_i> (x) |blank>) from the machine's target state."""
    index = {s: k for k, s in enumerate(op.outcome_symbols) if s is not None}
    phi = target_states(m, op.memory_states, [index[a] for a in m.alphabet], op.output_dim)
    cols = op.unitary[:, :: op.output_dim]
    return float(np.max(np.abs(cols @ op.memory_states.T - phi)))


def exact_word_distribution(op: StepOperator, initial, length: int) -> dict[tuple, float]:
    """Probabilities of every length-``length`` output word by branch propagation.

    ``initial`` is a state label, a state index or a memory vector.
    """
    if length < 1:
        raise ValueError("word length must be at least 1")
    start = np.asarray(initial) if isinstance(initial, np.ndarray) else op.memory_vector(initial)
    frontier = [((), 1.0, start)]
    for _ in range(length):
        nxt = []
        for word, prob, mem in frontier:
            for sym, p, post in op.branches(mem):
                if prob * p > BRANCH_FLOOR:
                    nxt.append((word + (sym,), prob * p, post))
        frontier = nxt
    out: dict[tuple, float] = {}
    for word, prob, _ in frontier:
        out[word] = out.get(word, 0.0) + prob
    return out


def stationary_word_distribution(op: StepOperator, length: int) -> dict[tuple, float]:
    """Word distribution with the memory started in the stationary ensemble."""
    out: dict[tuple, float] = {}
    for i, w in enumerate(op.stationary):
        if w <= 0:
            continue
        for word, p in exact_word_distribution(op, i, length).items():
            out[word] = out.get(word, 0.0) + w * p
    return out


def machine_word_distribution(m: UnifilarMachine, length: int, start=None) -> dict[tuple, float]:
    """Exact word probabilities straight from the machine, from ``start`` or stationary."""
    weights = np.asarray(m.stationary) if start is None else np.eye(m.n_states)[m.state_index(start)]
    frontier = {(): weights}
    for _ in range(length):
        nxt = {}
        for word, w in frontier.items():
            for x, sym in enumerate(m.alphabet):
                v = w @ m.symbol_matrices[x]
                if v.sum() > BRANCH_FLOOR:
                    nxt[word + (sym,)] = v
        frontier = nxt
    return {word: float(v.sum()) for word, v in frontier.items()}


def total_variation(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def _memory_key(v: np.ndarray) -> bytes:
    lead = np.flatnonzero(np.abs(v) > 1e-9)[0]
    phase = v[lead] / abs(v[lead])
    return np.round(np.conj(phase) * v, 10).astype(complex).tobytes()


def sample_trajectory(op: StepOperator, initial, length: int, seed: int) -> list:
    """Sample ``length`` symbols by repeated apply-and-measure.

    Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64). Each
    step draws one uniform u and picks the first outcome, in output basis
    order, whose cumulative probability exceeds u. ``initial`` is a state
    label or index, or ``None`` to draw the start state from the stationary
    distribution with the same generator. Branches are cached per distinct
    memory vector, so long runs cost one unitary application per memory state.
    """
    rng = np.random.default_rng(seed)
    if initial is None:
        initial = int(np.searchsorted(np.cumsum(op.stationary), rng.random(), side="right"))
        initial = min(initial, len(op.stationary) - 1)
    mem = op.memory_vector(initial)

    cache = op._cache
    key = _memory_key(mem)
    uniforms = rng.random(length)
    out = []
    for u in uniforms:
        entry = cache.get(key)
        if entry is None:
            br = op.branches(mem)
            cum = np.cumsum([b[1] for b in br])
            cum /= cum[-1]
            entry = (cum, [b[0] for b in br], [b[2] for b in br], [_memory_key(b[2]) for b in br])
            cache[key] = entry
        cum, syms, posts, keys = entry
        k = min(int(np.searchsorted(cum, u, side="right")), len(syms) - 1)
        out.append(syms[k])
        mem, key = posts[k], keys[k]
    return out


def window_distribution(symbols: Sequence, length: int) -> dict[tuple, float]:
    """Empirical frequencies of all overlapping windows of ``length`` symbols."""
    n = len(symbols) - length + 1
    if n <= 0:
        raise ValueError("trajectory shorter than the window")
    counts = Counter(tuple(symbols[t : t + length]) for t in range(n))
    return {w: c / n for w, c in counts.items()}


def heralding_forward_circuit(p: float, q: float) -> StepOperator:
    """Forward heralding-coin generator on a qubit memory and a qutrit output.

    The memory vectors reproduce the overlaps of the optimal forward states
    sqrt(1-p)|0> + sqrt(p)|1> and sqrt(1-q)|1> + sqrt(q)|2>.
    """
    HeraldingParams(p, q)
    states = optimal_forward_states(p, q)
    return build_step_operator(heralding_coin(p, q), memory_embedding(states @ states.T))


def _controlled(u: np.ndarray, control: int, target: int, on: int, n_qubits: int = 3) -> np.ndarray:
    """Gate applying ``u`` to ``target`` when qubit ``control`` is in |on>. Qubit 0 is most significant."""
    dim = 2 ** n_qubits
    g = np.zeros((dim, dim))
    for col in range(dim):
        bits = [(col >> (n_qubits - 1 - k)) & 1 for k in range(n_qubits)]
        if bits[control] != on:
            g[col, col] = 1.0
            continue
        for t in (0, 1):
            new = list(bits)
            new[target] = t
            row = sum(b << (n_qubits - 1 - k) for k, b in enumerate(new))
            g[row, col] += u[t, bits[target]]
    return g


def _rotation(x: float) -> np.ndarray:
    """Real unitary with |0> -> sqrt(1-x)|0> + sqrt(x)|1>."""
    c, s = math.sqrt(1 - x), math.sqrt(x)
    return np.array([[c, -s], [s, c]])


def retro_circuit_gates(p: float, q: float) -> np.ndarray:
    """Three-qubit unitary on qubits (a, b, c), basis index 4a + 2b + c.

    Gates in order: U_p on b controlled by a = 0, a rotation on c controlled
    by a = 1, then X on c controlled by b. The memory enters on a and leaves
    on c. The controlled rotation must map |0> to |s1> = sqrt(q)|0> + sqrt(1-q)|1>,
    so it is U_{1-q} under the U_x|0> = sqrt(1-x)|0> + sqrt(x)|1> convention.
    """
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    g1 = _controlled(_rotation(p), control=0, target=1, on=0)
    g2 = _controlled(_rotation(1 - q), control=0, target=2, on=1)
    g3 = _controlled(x, control=1, target=2, on=1)
    return g3 @ g2 @ g1


# Measured (a, b) -> symbol; (1, 1) never occurs.
RETRO_OUTCOMES = {(0, 0): "0", (1, 0): "1", (0, 1): "2"}


def heralding_retro_circuit(p: float, q: float) -> StepOperator:
    """Reverse heralding-coin generator built from the three-qubit gate sequence.

    With input |m>_a |0>_b |0>_c the gates leave the new memory on c and the
    outcome on (a, b). Relabelling qubits as |c> (x) |a b> puts the result in
    the memory (x) output layout, with the input's |m>|00> matching index
    4m = 4a, so only the output side needs the permutation.
    """
    HeraldingParams(p, q)
    gates = retro_circuit_gates(p, q)
    perm = np.zeros((8, 8))
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                perm[4 * c + 2 * a + b, 4 * a + 2 * b + c] = 1.0
    outcomes = tuple(RETRO_OUTCOMES.get((o >> 1, o & 1)) for o in range(4))
    rev = heralding_coin_reverse(p, q)
    return StepOperator(
        perm @ gates, 2, 4, outcomes, optimal_retro_states(q), tuple(rev.states), np.asarray(rev.stationary)
    )


def machine_digest(m: UnifilarMachine) -> str:
    return hashlib.sha256(machine_json(m).encode("utf-8")).hexdigest()


def format_trajectory(symbols: Sequence, digest: str, seed: int) -> str:
    header = [f"# machine-sha256: {digest}", f"# seed: {seed}", f"# length: {len(symbols)}"]
    return "\n".join(header + [str(s) for s in symbols]) + "\n"


def write_trajectory(path, symbols: Sequence, digest: str, seed: int) -> None:
    atomic_write_text(path, format_trajectory(symbols, digest, seed))


def read_trajectory(path) -> tuple[dict, list[str]]:
    meta, symbols = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line:
                symbols.append(line)
    return meta, symbols


def format_distribution_csv(dist: dict[tuple, float], sep: str = "") -> str:
    lines = ["word,probability"]
    for word in sorted(dist):
        lines.append(f"{sep.join(map(str, word))},{dist[word]!r}")
    return "\n".join(lines) + "\n"
