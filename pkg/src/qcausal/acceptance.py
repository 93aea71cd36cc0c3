"""End-to-end acceptance checks, shared by ``qcausal verify`` and the test suite.

Each check returns a :class:`CheckResult`; failures are results, not exceptions.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .families import cycle, flower, heralding_coin, heralding_coin_reverse, perturbed_coin
from .grid import DEFAULT_AXIS, heralding_grid
from .machines import isomorphic, minimize, statistical_complexity, topological_complexity, word_probability
from .optimality import heralding_delta_cmu, heralding_reverse_stationary, run_probe
from .reversal import reverse_epsilon_machine
from .simulator import (
    build_step_operator,
    exact_word_distribution,
    heralding_retro_circuit,
    machine_word_distribution,
    sample_trajectory,
    stationary_word_distribution,
    total_variation,
    window_distribution,
)
from .spectral import analyze_bidirectional, gram_fixed_point, padded_spectra, qmachine_spectrum

TIGHT = 1e-9


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:>2} {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _grid_points():
    return [(p, q) for p in DEFAULT_AXIS for q in DEFAULT_AXIS]


def check_quantum_symmetry() -> tuple[bool, str]:
    t0 = time.perf_counter()
    rows = heralding_grid(DEFAULT_AXIS, DEFAULT_AXIS)
    elapsed = time.perf_counter() - t0
    sym = max(abs(r.cq_bar_f - r.cq_bar_r) for r in rows)
    closed = max(max(abs(r.cq_bar_f - r.cq_closed_form), abs(r.cq_bar_r - r.cq_closed_form)) for r in rows)
    ok = len(rows) == 81 and sym < TIGHT and closed < TIGHT and elapsed < 10.0
    return ok, f"max |fwd-rev| {sym:.2e}, max |q-machine - closed form| {closed:.2e}, grid {elapsed:.2f}s"


def check_classical_asymmetry() -> tuple[bool, str]:
    worst = 0.0
    for p, q in _grid_points():
        fwd = heralding_coin(p, q)
        rev = reverse_epsilon_machine(fwd)
        pipeline = statistical_complexity(rev) - statistical_complexity(fwd)
        worst = max(worst, abs(pipeline - heralding_delta_cmu(p, q)))
    spot = statistical_complexity(heralding_coin_reverse(0.2, 0.6)) - statistical_complexity(heralding_coin(0.2, 0.6))
    ok = worst < TIGHT and abs(spot - 0.54145) < 1e-4
    return ok, f"max |pipeline - closed form| {worst:.2e}, value at (0.2, 0.6) {spot:.6f}"


def check_reverse_structure() -> tuple[bool, str]:
    worst, sizes, iso_fail = 0.0, set(), []
    for p, q in _grid_points():
        rev = heralding_coin_reverse(p, q)
        sizes.add(rev.n_states)
        if rev.n_states == 3:
            worst = max(worst, float(np.max(np.abs(rev.stationary - heralding_reverse_stationary(p, q)))))
        pc = perturbed_coin(p, q)
        if not isomorphic(reverse_epsilon_machine(pc), minimize(pc)):
            iso_fail.append((p, q))
    ok = sizes == {3} and worst < TIGHT and not iso_fail
    return ok, f"reverse state counts {sorted(sizes)}, max stationary error {worst:.2e}, non-isomorphic perturbed reversals {len(iso_fail)}"


def check_complexity_ordering() -> tuple[bool, str]:
    rows = heralding_grid(DEFAULT_AXIS, DEFAULT_AXIS)
    gap_e = min(r.cq_bar_f - r.e_l for r in rows)
    gap_q = min(r.c_mu_f - r.cq_bar_f for r in rows)
    gap_c = min(r.c_mu_r - r.c_mu_f for r in rows)
    sym = max(abs(r.cq_bar_f - r.cq_bar_r) for r in rows)
    converged = all(r.e_converged for r in rows)
    ok = gap_e > 1e-6 and gap_q > 1e-6 and gap_c >= -TIGHT and sym < TIGHT and converged
    return ok, (
        f"min gaps: C_q - E {gap_e:.4f}, C_mu+ - C_q {gap_q:.4f}, C_mu- - C_mu+ {gap_c:.4f}; "
        f"excess entropy converged everywhere: {converged}"
    )


def check_flower() -> tuple[bool, str]:
    t0 = time.perf_counter()
    m = flower(64, 2)
    c_f, d_f = statistical_complexity(m), topological_complexity(m)
    rev = reverse_epsilon_machine(m)
    spec_f = qmachine_spectrum(m, gram_fixed_point(m))
    spec_r = qmachine_spectrum(rev, gram_fixed_point(rev))
    a, b = padded_spectra(spec_f.eigenvalues, spec_r.eigenvalues)
    match = float(np.max(np.abs(a - b)))
    elapsed = time.perf_counter() - t0
    bound = math.log2(3) + TIGHT
    ok = (
        abs(c_f - 4.0) < TIGHT
        and abs(d_f - math.log2(65)) < TIGHT
        and rev.n_states <= 3
        and spec_f.entropy <= bound
        and spec_r.entropy <= bound
        and spec_f.rank_at_tol <= 3
        and match < 1e-8
        and elapsed < 60.0
    )
    return ok, (
        f"C_mu+ {c_f:.12f}, D_mu+ {d_f:.6f}, reverse states {rev.n_states}, "
        f"C_q fwd/rev {spec_f.entropy:.6f}/{spec_r.entropy:.6f}, rank {spec_f.rank_at_tol}, "
        f"spectrum mismatch {match:.1e}, {elapsed:.2f}s"
    )


SPECTRUM_CASES = {
    "heralding(0.3,0.7)": lambda: heralding_coin(0.3, 0.7),
    "perturbed(0.3,0.3)": lambda: perturbed_coin(0.3, 0.3),
    "flower(8,2)": lambda: flower(8, 2),
    "flower(8,3)": lambda: flower(8, 3),
    "cycle(5)": lambda: cycle(5),
}


def check_spectrum_equality() -> tuple[bool, str]:
    worst = {}
    for name, make in SPECTRUM_CASES.items():
        m = make()
        rev = reverse_epsilon_machine(m)
        a, b = padded_spectra(qmachine_spectrum(m).eigenvalues, qmachine_spectrum(rev).eigenvalues)
        worst[name] = float(np.max(np.abs(a - b)))
    ok = all(v < 1e-8 for v in worst.values())
    return ok, "max spectrum mismatch " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


def check_majorization(seed: int = 1) -> tuple[bool, str]:
    t0 = time.perf_counter()
    s = run_probe(per_point=1000, seed=seed)
    elapsed = time.perf_counter() - t0
    ok = s.points == 25 and s.candidates == 25_000 and s.passed and elapsed < 30.0
    return ok, (
        f"{s.majorized}/{s.candidates} majorized, {s.entropy_ordered}/{s.candidates} entropy-ordered, "
        f"optimal candidate gap {s.optimal_candidate_gap:.1e}, {elapsed:.2f}s"
    )


def bound_family():
    """Machines on which the quantum-below-classical bounds are checked."""
    return {
        "heralding(0.2,0.6)": heralding_coin(0.2, 0.6),
        "heralding(0.5,0.5)": heralding_coin(0.5, 0.5),
        "heralding(0.9,0.1)": heralding_coin(0.9, 0.1),
        "perturbed(0.3,0.3)": perturbed_coin(0.3, 0.3),
        "perturbed(0.2,0.7)": perturbed_coin(0.2, 0.7),
        "flower(4,2)": flower(4, 2),
        "flower(8,2)": flower(8, 2),
        "flower(8,3)": flower(8, 3),
        "flower(16,2)": flower(16, 2),
        "cycle(2)": cycle(2),
        "cycle(3)": cycle(3),
        "cycle(5)": cycle(5),
    }


def check_quantum_bounds() -> tuple[bool, str]:
    failed = []
    for name, m in bound_family().items():
        r = analyze_bidirectional(m)
        if not (r.result2_holds and r.result3_holds):
            failed.append(name)
    h = analyze_bidirectional(heralding_coin(0.2, 0.6))
    dim_ok = abs(h.dq_bar_reverse - 1.0) < TIGHT and abs(h.d_mu_reverse - math.log2(3)) < TIGHT
    ok = not failed and dim_ok
    return ok, (
        f"bounds hold on {len(bound_family()) - len(failed)}/{len(bound_family())} machines"
        + (f" (failed: {', '.join(failed)})" if failed else "")
        + f"; heralding reverse q-dimension {h.dq_bar_reverse:.6f} vs classical {h.d_mu_reverse:.6f}"
    )


def check_simulator(length: int = 1_000_000, seed: int = 2024) -> tuple[bool, str]:
    t0 = time.perf_counter()
    m = heralding_coin(0.5, 0.5)
    rev = heralding_coin_reverse(0.5, 0.5)
    generic = build_step_operator(m)
    retro = heralding_retro_circuit(0.5, 0.5)
    worst = 0.0
    for op, machine in ((generic, m), (retro, rev)):
        for L in range(1, 7):
            for i, s in enumerate(machine.states):
                got = exact_word_distribution(op, i, L)
                want = machine_word_distribution(machine, L, start=s)
                worst = max(worst, max(abs(got.get(w, 0.0) - want.get(w, 0.0)) for w in set(got) | set(want)))
            stat = stationary_word_distribution(op, L)
            want = machine_word_distribution(machine, L)
            worst = max(worst, max(abs(stat.get(w, 0.0) - want.get(w, 0.0)) for w in set(stat) | set(want)))
    tvs = []
    for op, machine in ((generic, m), (retro, rev)):
        traj = sample_trajectory(op, None, length, seed)
        tvs.append(total_variation(window_distribution(traj, 6), machine_word_distribution(machine, 6)))
    elapsed = time.perf_counter() - t0
    ok = worst < TIGHT and max(tvs) < 0.01 and elapsed < 60.0
    return ok, f"max exact deviation {worst:.1e}, sampled TV generic {tvs[0]:.4f} retro {tvs[1]:.4f}, {elapsed:.2f}s"


def check_deterministic_cycles() -> tuple[bool, str]:
    worst = 0.0
    for k in (2, 3, 5):
        r = analyze_bidirectional(cycle(k))
        values = [
            r.c_mu_forward, r.c_mu_reverse, r.d_mu_forward, r.d_mu_reverse,
            r.cq_bar_forward, r.cq_bar_reverse, r.dq_bar_forward, r.dq_bar_reverse,
        ]
        worst = max(worst, max(abs(v - math.log2(k)) for v in values), r.delta_c_mu, r.delta_cq_bar)
    return worst < 1e-6, f"max deviation from log2 k (and from zero asymmetry) {worst:.1e}"


def transduce_heralding(bits) -> tuple[str, ...]:
    """Map a binary sequence x_{-1} x_0 ... x_{L-1} to y_0 ... y_{L-1}:
    a 1 stays 1, a 0 right after a 1 becomes 2, any other 0 stays 0."""
    out = []
    for prev, cur in zip(bits, bits[1:]):
        out.append("1" if cur == "1" else ("2" if prev == "1" else "0"))
    return tuple(out)


def transduced_distribution(p: float, q: float, length: int) -> dict[tuple, float]:
    """Heralding word distribution by enumerating perturbed-coin words of length L + 1."""
    coin = perturbed_coin(p, q)
    pi = coin.stationary
    out: dict[tuple, float] = {}
    for bits in itertools.product("01", repeat=length + 1):
        prob = sum(pi[i] * word_probability(coin, i, "".join(bits)) for i in range(coin.n_states))
        if prob > 0:
            y = transduce_heralding(bits)
            out[y] = out.get(y, 0.0) + prob
    return out


def check_transduction() -> tuple[bool, str]:
    worst = 0.0
    for p, q in ((0.5, 0.5), (0.2, 0.6), (0.7, 0.3)):
        m = heralding_coin(p, q)
        for L in range(1, 7):
            a = machine_word_distribution(m, L)
            b = transduced_distribution(p, q, L)
            worst = max(worst, max(abs(a.get(w, 0.0) - b.get(w, 0.0)) for w in set(a) | set(b)))
    return worst < TIGHT, f"max word-probability difference {worst:.1e} for L <= 6"


CRITERIA: dict[int, tuple[str, Callable[[], tuple[bool, str]]]] = {
    1: ("heralding quantum memory is time-symmetric", check_quantum_symmetry),
    2: ("heralding classical asymmetry closed form", check_classical_asymmetry),
    3: ("reverse machine structure", check_reverse_structure),
    4: ("heralding complexity ordering", check_complexity_ordering),
    5: ("flower(64,2) classical/quantum gap", check_flower),
    6: ("forward/reverse q-machine spectra agree", check_spectrum_equality),
    7: ("retro candidate majorization probe", check_majorization),
    8: ("quantum memory below classical memory", check_quantum_bounds),
    9: ("simulator reproduces machine statistics", check_simulator),
    10: ("deterministic cycles are symmetric", check_deterministic_cycles),
    11: ("heralding equals transduced perturbed coin", check_transduction),
}

SUITES = {
    "heralding": [1, 2, 4, 9, 11],
    "flower": [5, 8],
    "majorization": [7],
    "reversal": [3, 6, 10],
    "all": sorted(CRITERIA),
}


def run_check(number: int, **kwargs) -> CheckResult:
    name, fn = CRITERIA[number]
    t0 = time.perf_counter()
    try:
        passed, detail = fn(**kwargs)
    except Exception as exc:  # a crash is a failed criterion, reported like any other
        passed, detail = False, f"raised {type(exc).__name__}: {exc}"
    return CheckResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return [run_check(n) for n in SUITES[name]]
