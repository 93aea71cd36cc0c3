"""q-machine overlaps, density-operator spectra and the two-direction report."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .machines import (
    DEFAULT_CAP,
    ComplexityReport,
    UnifilarMachine,
    excess_entropy_estimate,
    minimize,
    require_valid,
    statistical_complexity,
    topological_complexity,
)
from .numerics import symmetric_eigenvalues, von_neumann_entropy
from .reversal import reverse_epsilon_machine

GRAM_TOL = 1e-13
GRAM_MAX_ITER = 10_000
RANK_TOL = 1e-8
PSD_TOL = 1e-9


class NotPSDError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Overlaps <S_i|S_j> of q-machine states.

    ``iterations_used`` counts sweeps of the overlap recursion until the
    largest entry change fell below tolerance. It tracks how deep the
    recursion must go but is not claimed to equal the cryptic order.
    """

    matrix: np.ndarray
    iterations_used: int
    converged: bool

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class QuantumSpectrum:
    eigenvalues: np.ndarray
    entropy: float
    rank_at_tol: int

    @property
    def dimension_bits(self) -> float:
        return math.log2(self.rank_at_tol)


@dataclass(frozen=True)
class AnalysisConfig:
    gram_tol: float = GRAM_TOL
    gram_max_iter: int = GRAM_MAX_ITER
    merge_tol: float = 1e-9
    max_states: int = 10_000
    minimize_tol: float = 1e-9
    rank_tol: float = RANK_TOL
    horizon: int = 12
    entropy_tol: float = 1e-6
    cap: float = DEFAULT_CAP


def iterate_gram(m: UnifilarMachine) -> Iterator[np.ndarray]:
    """Successive iterates G(l+1)_ij = sum_x sqrt(T_i^x T_j^x) G(l)_{succ(i,x), succ(j,x)}.

    The first value yielded is G(0) = identity.
    """
    n = m.n_states
    amp = np.sqrt(m.emission)
    succ = np.clip(m.successor, 0, None)
    weights = [np.outer(amp[:, x], amp[:, x]) for x in range(m.n_symbols)]
    g = np.eye(n)
    while True:
        yield g
        nxt = np.zeros((n, n))
        for x, w in enumerate(weights):
            nxt += w * g[np.ix_(succ[:, x], succ[:, x])]
        g = 0.5 * (nxt + nxt.T)


def gram_fixed_point(m: UnifilarMachine, tol: float = GRAM_TOL, max_iter: int = GRAM_MAX_ITER) -> GramMatrix:
    """Fixed point of the q-machine overlap recursion, started from the identity.

    On hitting ``max_iter`` the last iterate is returned with ``converged``
    false rather than raising.
    """
    it = iterate_gram(m)
    g = next(it)
    for k in range(1, max_iter + 1):
        nxt = next(it)
        if np.max(np.abs(nxt - g)) < tol:
            return GramMatrix(_frozen(nxt), k, True)
        g = nxt
    return GramMatrix(_frozen(g), max_iter, False)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


def qmachine_spectrum(m: UnifilarMachine, g: GramMatrix | None = None, rank_tol: float = RANK_TOL) -> QuantumSpectrum:
    """Spectrum of rho = sum_i pi_i |S_i><S_i|.

    rho has the same nonzero eigenvalues as the n x n matrix
    sqrt(pi_i pi_j) G_ij, which is what gets diagonalized.
    """
    if g is None:
        g = gram_fixed_point(m)
    s = np.sqrt(np.asarray(m.stationary))
    lam = symmetric_eigenvalues(s[:, None] * g.matrix * s[None, :])
    if lam[-1] < -PSD_TOL:
        raise NotPSDError(f"overlap matrix is not positive semidefinite (eigenvalue {lam[-1]:.3g})")
    return QuantumSpectrum(_frozen(lam), von_neumann_entropy(lam), int(np.sum(lam > rank_tol)))


def qmachine_complexity(m: UnifilarMachine) -> float:
    """q-machine memory entropy, an upper bound on the quantum statistical complexity."""
    return qmachine_spectrum(m).entropy


def qmachine_dimension(m: UnifilarMachine, rank_tol: float = RANK_TOL) -> float:
    """log2 of the rank of the q-machine density operator."""
    return qmachine_spectrum(m, rank_tol=rank_tol).dimension_bits


def padded_spectra(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad two descending spectra to a common length."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(a.size, b.size)
    return np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size))


def analyze_bidirectional(m: UnifilarMachine, config: AnalysisConfig | None = None) -> ComplexityReport:
    """Classical and q-machine complexities of ``m`` and of its time reversal.

    The input is minimized first, so any presentation of a process gives the
    same report. The bounds C_q <= C_mu and D_q <= D_mu, taken against the
    smaller classical value of the two directions, are checked and recorded
    in the report rather than raised.
    """
    cfg = config or AnalysisConfig()
    require_valid(m)
    fwd = minimize(m, tol=cfg.minimize_tol, horizon=cfg.horizon)
    rev = reverse_epsilon_machine(
        fwd, merge_tol=cfg.merge_tol, max_states=cfg.max_states, minimize_tol=cfg.minimize_tol, horizon=cfg.horizon
    )

    g_f = gram_fixed_point(fwd, cfg.gram_tol, cfg.gram_max_iter)
    g_r = gram_fixed_point(rev, cfg.gram_tol, cfg.gram_max_iter)
    spec_f = qmachine_spectrum(fwd, g_f, cfg.rank_tol)
    spec_r = qmachine_spectrum(rev, g_r, cfg.rank_tol)

    c_f, c_r = statistical_complexity(fwd), statistical_complexity(rev)
    d_f, d_r = topological_complexity(fwd), topological_complexity(rev)
    est = excess_entropy_estimate(fwd, cfg.horizon, cfg.entropy_tol, cfg.cap)

    notes = []
    r2 = max(spec_f.entropy, spec_r.entropy) <= min(c_f, c_r) + 1e-9
    r3 = max(spec_f.dimension_bits, spec_r.dimension_bits) <= min(d_f, d_r) + 1e-9
    if not r2:
        notes.append("q-machine entropy exceeds the smaller classical complexity")
    if not r3:
        notes.append("q-machine dimension exceeds the smaller classical dimension")
    if not (g_f.converged and g_r.converged):
        notes.append("overlap recursion did not converge; q-machine values are approximate")
    if not est.converged:
        notes.append(f"excess entropy estimate not converged at horizon {est.horizon}")

    return ComplexityReport(
        c_mu_forward=c_f,
        c_mu_reverse=c_r,
        d_mu_forward=d_f,
        d_mu_reverse=d_r,
        excess_entropy_estimate=est,
        cq_bar_forward=spec_f.entropy,
        cq_bar_reverse=spec_r.entropy,
        dq_bar_forward=spec_f.dimension_bits,
        dq_bar_reverse=spec_r.dimension_bits,
        delta_c_mu=abs(c_r - c_f),
        delta_cq_bar=abs(spec_r.entropy - spec_f.entropy),
        n_states_forward=fwd.n_states,
        n_states_reverse=rev.n_states,
        gram_converged=g_f.converged and g_r.converged,
        result2_holds=r2,
        result3_holds=r3,
        notes=notes,
    )
