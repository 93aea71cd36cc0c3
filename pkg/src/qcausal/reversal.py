"""Time reversal: edge reversal, mixed-state determinization, minimization."""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix

from .machines import GeneralHMM, UnifilarMachine, minimize, require_valid
from .numerics import recurrent_classes, stationary_distribution

DEFAULT_MERGE_TOL = 1e-9
DEFAULT_MAX_STATES = 10_000


class StateBudgetError(RuntimeError):
    """Determinization discovered more belief states than allowed."""

    def __init__(self, budget: int):
        self.budget = budget
        super().__init__(
            f"determinization exceeded the state budget of {budget} belief states "
            "(the mixed-state set may be infinite)"
        )


def reverse_presentation(m: UnifilarMachine) -> GeneralHMM:
    """HMM generating the time-reversed process.

    With stationary distribution pi, the reversed symbol matrices are
    R^x[j, i] = pi_i T^x[i, j] / pi_j, so any word w has the reversed
    probability P(reverse(w)) under the forward machine.
    """
    require_valid(m)
    pi = np.asarray(m.stationary)
    if np.any(pi <= 0):
        raise ValueError("every state needs positive stationary probability")
    mats = np.swapaxes(m.symbol_matrices, 1, 2) * pi[None, None, :] / pi[None, :, None]
    return GeneralHMM(m.alphabet, m.states, mats)


def _canonical(b: np.ndarray) -> bytes:
    return np.round(b, 12).tobytes()


def determinize(
    h: GeneralHMM,
    merge_tol: float = DEFAULT_MERGE_TOL,
    max_states: int = DEFAULT_MAX_STATES,
    initial=None,
) -> UnifilarMachine:
    """Unifilar machine over belief states of ``h``.

    Starting from the stationary belief (or ``initial``), each symbol x maps
    b to b M^x / |b M^x|_1 with probability |b M^x|_1. Beliefs are keyed by
    rounding to 12 decimals and merged with any existing belief within
    ``merge_tol`` in sup norm. Only the unique terminal strongly connected
    component of the belief graph is returned; its states are named
    ``b<k>`` in discovery order.
    """
    problems = h.validate(tol=1e-9)
    if problems:
        raise ValueError("; ".join(problems))
    mats = np.asarray(h.matrices)
    start = stationary_distribution(h.transition_matrix) if initial is None else np.asarray(initial, float)

    n_hidden = mats.shape[1]
    store = np.empty((min(max_states, 1024), n_hidden))
    store[0] = start / start.sum()
    count = 1
    index = {_canonical(store[0]): 0}
    edges: list[tuple[int, int, float, int]] = []
    head = 0
    while head < count:
        b = store[head].copy()
        for x in range(mats.shape[0]):
            v = b @ mats[x]
            px = float(v.sum())
            if px <= 0.0:
                continue
            nb = v / px
            key = _canonical(nb)
            k = index.get(key)
            if k is None:
                near = np.flatnonzero(np.max(np.abs(store[:count] - nb), axis=1) <= merge_tol)
                k = int(near[0]) if near.size else None
            if k is None:
                if count >= max_states:
                    raise StateBudgetError(max_states)
                if count == store.shape[0]:
                    store = np.vstack([store, np.empty((min(count, max_states - count), n_hidden))])
                k = count
                store[k] = nb
                count += 1
                index[key] = k
            edges.append((head, x, px, k))
        head += 1

    rows = [e[0] for e in edges]
    cols = [e[3] for e in edges]
    classes = recurrent_classes(csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(count, count)))
    if len(classes) != 1:
        raise RuntimeError(f"belief graph has {len(classes)} terminal components; expected one")
    keep = sorted(classes[0])
    new_id = {old: k for k, old in enumerate(keep)}
    emission = np.zeros((len(keep), len(h.alphabet)))
    successor = -np.ones((len(keep), len(h.alphabet)), dtype=np.int64)
    for i, x, px, j in edges:
        if i in new_id:
            emission[new_id[i], x] = px
            successor[new_id[i], x] = new_id[j]
    emission /= emission.sum(axis=1, keepdims=True)
    return UnifilarMachine(h.alphabet, [f"b{k}" for k in range(len(keep))], emission, successor)


def reverse_epsilon_machine(
    m: UnifilarMachine,
    merge_tol: float = DEFAULT_MERGE_TOL,
    max_states: int = DEFAULT_MAX_STATES,
    minimize_tol: float = 1e-9,
    horizon: int = 12,
) -> UnifilarMachine:
    """Minimal unifilar machine of the time-reversed process."""
    det = determinize(reverse_presentation(m), merge_tol=merge_tol, max_states=max_states)
    return minimize(det, tol=minimize_tol, horizon=horizon)
