"""Heralding-coin closed forms, its optimal quantum memory states, and a
randomized majorization check of retrocausal memory candidates."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .families import HeraldingParams
from .numerics import binary_entropy, hermitian_eigenvalues, majorizes, symmetric_eigenvalues, von_neumann_entropy

CONSTRAINT_SLACK = 1e-12
ENTROPY_SLACK = 1e-9


class ConstraintViolation(ValueError):
    pass


def heralding_forward_stationary(p: float, q: float) -> np.ndarray:
    HeraldingParams(p, q)
    return np.array([q, p]) / (p + q)


def heralding_reverse_stationary(p: float, q: float) -> np.ndarray:
    """Stationary distribution over reverse states (s0, s1, s2), named by the last symbol seen."""
    HeraldingParams(p, q)
    return np.array([q - p * q, p, p * q]) / (p + q)


def heralding_delta_cmu(p: float, q: float) -> float:
    """Classical causal asymmetry (1 - pi_1) h(pi_2 / (1 - pi_1)) over the reverse states."""
    pi = heralding_reverse_stationary(p, q)
    return float((1 - pi[1]) * binary_entropy(pi[2] / (1 - pi[1])))


def heralding_overlap_c(p: float, q: float) -> float:
    HeraldingParams(p, q)
    return (p * p * (1 + 4 * (1 - q) * q) - 2 * p * q + q * q) / (p + q) ** 2


def heralding_cq_closed_form(p: float, q: float) -> float:
    """Quantum memory entropy h((1 + sqrt(c)) / 2), the same in both time directions."""
    c = heralding_overlap_c(p, q)
    return binary_entropy((1 + math.sqrt(max(c, 0.0))) / 2)


def optimal_forward_states(p: float, q: float) -> np.ndarray:
    """Rows are |s0> = sqrt(1-p)|0> + sqrt(p)|1> and |s1> = sqrt(1-q)|1> + sqrt(q)|2>."""
    HeraldingParams(p, q)
    return np.array([
        [math.sqrt(1 - p), math.sqrt(p), 0.0],
        [0.0, math.sqrt(1 - q), math.sqrt(q)],
    ])


def optimal_retro_states(q: float) -> np.ndarray:
    """Rows are |s0> = |0>, |s1> = sqrt(q)|0> + sqrt(1-q)|1>, |s2> = |1>."""
    HeraldingParams(0.5, q)
    return np.array([
        [1.0, 0.0],
        [math.sqrt(q), math.sqrt(1 - q)],
        [0.0, 1.0],
    ])


def ensemble_spectrum(states: np.ndarray, weights) -> np.ndarray:
    """Nonzero-dimension spectrum of sum_i w_i |s_i><s_i| via its weighted Gram matrix."""
    s = np.sqrt(np.asarray(weights, dtype=float))
    g = np.real(np.asarray(states) @ np.conj(np.asarray(states)).T)
    return symmetric_eigenvalues(s[:, None] * g * s[None, :])


def ensemble_entropy(states: np.ndarray, weights) -> float:
    return von_neumann_entropy(ensemble_spectrum(states, weights))


@dataclass(frozen=True)
class CandidateRetroState:
    """|psi> = r sin(theta) e^{i omega}|0> + sqrt(1 - r^2) e^{i alpha}|1> + r cos(theta)|2>."""

    r: float
    theta: float
    omega: float = 0.0
    alpha: float = 0.0

    def vector(self) -> np.ndarray:
        return np.array([
            self.r * math.sin(self.theta) * np.exp(1j * self.omega),
            math.sqrt(max(1 - self.r * self.r, 0.0)) * np.exp(1j * self.alpha),
            self.r * math.cos(self.theta),
        ])

    def violations(self, q: float) -> list[str]:
        out = []
        if not (0.0 <= self.r <= 1.0 and 0.0 <= self.theta <= math.pi / 2):
            out.append("r or theta out of range")
        if self.r * math.sin(self.theta) > math.sqrt(q) + CONSTRAINT_SLACK:
            out.append(f"overlap with |s0> exceeds sqrt(q): {self.r * math.sin(self.theta)!r}")
        if math.sqrt(max(1 - self.r ** 2, 0.0)) > math.sqrt(1 - q) + CONSTRAINT_SLACK:
            out.append(f"overlap with |s2> exceeds sqrt(1-q): {math.sqrt(max(1 - self.r ** 2, 0.0))!r}")
        return out

    @classmethod
    def optimal(cls, q: float) -> "CandidateRetroState":
        """The candidate equal to the optimal retro state sqrt(q)|0> + sqrt(1-q)|1>."""
        return cls(r=math.sqrt(q), theta=math.pi / 2)


@dataclass(frozen=True)
class ProbeVerdict:
    p: float
    q: float
    candidate: CandidateRetroState
    reference_spectrum: tuple[float, ...]
    candidate_spectrum: tuple[float, ...]
    majorizes: bool
    entropy_ordered: bool

    def to_dict(self) -> dict:
        return {
            "params": {"p": self.p, "q": self.q, **asdict(self.candidate)},
            "spectra": {"reference": list(self.reference_spectrum), "candidate": list(self.candidate_spectrum)},
            "verdict": {"majorizes": self.majorizes, "entropy_ordered": self.entropy_ordered},
        }


def _retro_density(p: float, q: float, psi: np.ndarray) -> np.ndarray:
    """pi_0 |0><0| + pi_2 |1><1| + pi_1 |psi><psi| for a stack of vectors psi of shape (..., 3)."""
    pi = heralding_reverse_stationary(p, q)
    psi = np.asarray(psi, dtype=complex)
    rho = pi[1] * psi[..., :, None] * np.conj(psi[..., None, :])
    rho[..., 0, 0] += pi[0]
    rho[..., 1, 1] += pi[2]
    return rho


def reference_retro_spectrum(p: float, q: float) -> np.ndarray:
    """Spectrum of the retro ensemble built from the optimal states, padded to three entries."""
    psi = np.array([math.sqrt(q), math.sqrt(1 - q), 0.0])
    return symmetric_eigenvalues(_retro_density(p, q, psi).real)


def _entropies(lam: np.ndarray) -> np.ndarray:
    lam = np.clip(lam, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0, lam * np.log2(np.where(lam > 0, lam, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def majorization_probe(p: float, q: float, candidate: CandidateRetroState) -> ProbeVerdict:
    """Compare the optimal retro ensemble with one where |s1> is replaced by ``candidate``.

    Phases are kept, so the candidate ensemble is a complex Hermitian matrix.
    """
    HeraldingParams(p, q)
    problems = candidate.violations(q)
    if problems:
        raise ConstraintViolation("fidelity constraint violated: " + "; ".join(problems))
    ref = reference_retro_spectrum(p, q)
    lam = hermitian_eigenvalues(_retro_density(p, q, candidate.vector()))
    s_ref = von_neumann_entropy(ref)
    s_cand = von_neumann_entropy(lam)
    return ProbeVerdict(
        p, q, candidate, tuple(map(float, ref)), tuple(map(float, lam)),
        majorizes(ref, lam), s_ref <= s_cand + ENTROPY_SLACK,
    )


def sample_candidates(q: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` rows of (r, theta, omega, alpha), uniform on the box and kept only
    where both overlap constraints hold (rejection sampling)."""
    HeraldingParams(0.5, q)
    out = np.empty((0, 4))
    while out.shape[0] < count:
        need = count - out.shape[0]
        batch = max(4 * need, 256)
        r = rng.random(batch)
        theta = rng.random(batch) * (math.pi / 2)
        omega = rng.random(batch) * (2 * math.pi)
        alpha = rng.random(batch) * (2 * math.pi)
        ok = (r * np.sin(theta) <= math.sqrt(q)) & (np.sqrt(1 - r * r) <= math.sqrt(1 - q))
        out = np.vstack([out, np.column_stack([r, theta, omega, alpha])[ok][:need]])
    return out


def _candidate_vectors(params: np.ndarray) -> np.ndarray:
    r, theta, omega, alpha = params.T
    return np.column_stack([
        r * np.sin(theta) * np.exp(1j * omega),
        np.sqrt(np.clip(1 - r * r, 0.0, None)) * np.exp(1j * alpha),
        r * np.cos(theta) + 0j,
    ])


DEFAULT_PROBE_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass
class ProbeSummary:
    points: int
    candidates: int
    majorized: int
    entropy_ordered: int
    optimal_candidate_gap: float
    verdicts: list[ProbeVerdict]

    @property
    def passed(self) -> bool:
        return (
            self.majorized == self.candidates
            and self.entropy_ordered == self.candidates
            and self.optimal_candidate_gap <= ENTROPY_SLACK
        )

    def to_dict(self, include_verdicts: bool = True) -> dict:
        out = {
            "summary": {
                "points": self.points,
                "candidates": self.candidates,
                "majorized": self.majorized,
                "entropy_ordered": self.entropy_ordered,
                "optimal_candidate_gap": self.optimal_candidate_gap,
                "passed": self.passed,
            }
        }
        if include_verdicts:
            out["probes"] = [v.to_dict() for v in self.verdicts]
        return out

    def to_json(self, include_verdicts: bool = True) -> str:
        return json.dumps(self.to_dict(include_verdicts), indent=2)


def run_probe(
    grid=DEFAULT_PROBE_GRID,
    per_point: int = 1000,
    seed: int = 1,
    keep_verdicts: bool = False,
) -> ProbeSummary:
    """Majorization probe over every (p, q) in ``grid`` x ``grid``.

    Each grid point draws from its own generator seeded with (seed, point
    index), so points are independent and the run is reproducible. The
    optimal candidate is also checked at every point: its entropy must match
    the reference within the entropy slack.
    """
    points = [(p, q) for p in grid for q in grid]
    total = majorized = ordered = 0
    gap = 0.0
    verdicts: list[ProbeVerdict] = []
    for k, (p, q) in enumerate(points):
        rng = np.random.default_rng([seed, k])
        params = sample_candidates(q, per_point, rng)
        ref = reference_retro_spectrum(p, q)
        lam = hermitian_eigenvalues(_retro_density(p, q, _candidate_vectors(params)))
        maj = np.all(np.cumsum(ref)[None, :] >= np.cumsum(lam, axis=1) - 1e-9, axis=1)
        s_ref = von_neumann_entropy(ref)
        ent = s_ref <= _entropies(lam) + ENTROPY_SLACK
        total += len(params)
        majorized += int(maj.sum())
        ordered += int(ent.sum())
        best = majorization_probe(p, q, CandidateRetroState.optimal(q))
        gap = max(gap, abs(s_ref - von_neumann_entropy(best.candidate_spectrum)))
        if keep_verdicts:
            for row, lv, mj, en in zip(params, lam, maj, ent):
                verdicts.append(ProbeVerdict(
                    p, q, CandidateRetroState(*map(float, row)),
                    tuple(map(float, ref)), tuple(map(float, lv)), bool(mj), bool(en),
                ))
    return ProbeSummary(len(points), total, majorized, ordered, gap, verdicts)
