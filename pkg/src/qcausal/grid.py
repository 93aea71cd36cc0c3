"""Heralding-coin parameter sweeps."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np

from .families import heralding_coin
from .optimality import heralding_cq_closed_form
from .spectral import AnalysisConfig, analyze_bidirectional

DEFAULT_AXIS = tuple(round(0.1 * k, 10) for k in range(1, 10))


@dataclass(frozen=True)
class GridRow:
    p: float
    q: float
    c_mu_f: float
    c_mu_r: float
    d_mu_f: float
    d_mu_r: float
    e_l: float
    e_converged: bool
    cq_bar_f: float
    cq_bar_r: float
    dq_bar_f: float
    dq_bar_r: float
    delta_c_mu: float
    delta_cq_bar: float
    cq_closed_form: float


GRID_HEADER = [f.name for f in fields(GridRow)]


def parse_axis(spec: str, step: float = 0.1) -> list[float]:
    """Values for one grid axis: a single number, or ``lo:hi`` walked in ``step`` increments."""
    if ":" not in spec:
        values = [float(spec)]
    else:
        lo_s, hi_s = spec.split(":", 1)
        lo, hi = float(lo_s), float(hi_s)
        if hi < lo:
            raise ValueError(f"empty range {spec!r}")
        if step <= 0:
            raise ValueError("step must be positive")
        if hi > lo and step > hi - lo + 1e-12:
            raise ValueError(f"step {step} is larger than the range {spec!r}")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        values = [round(lo + k * step, 12) for k in range(count)]
    for v in values:
        if not 0.0 < v < 1.0:
            raise ValueError(f"grid value {v} must lie strictly between 0 and 1")
    return values


def heralding_row(p: float, q: float, config: AnalysisConfig | None = None) -> GridRow:
    r = analyze_bidirectional(heralding_coin(p, q), config)
    est = r.excess_entropy_estimate
    return GridRow(
        p, q, r.c_mu_forward, r.c_mu_reverse, r.d_mu_forward, r.d_mu_reverse,
        est.value, est.converged, r.cq_bar_forward, r.cq_bar_reverse,
        r.dq_bar_forward, r.dq_bar_reverse, r.delta_c_mu, r.delta_cq_bar,
        heralding_cq_closed_form(p, q),
    )


def _row_args(args):
    return heralding_row(*args)


def heralding_grid(ps, qs, config: AnalysisConfig | None = None, jobs: int = 1) -> list[GridRow]:
    """One row per (p, q), p-major, in the same order regardless of ``jobs``."""
    tasks = [(p, q, config) for p in ps for q in qs]
    if jobs <= 1 or len(tasks) < 2:
        return [heralding_row(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_row_args, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def grid_csv(rows: list[GridRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRID_HEADER)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(row)])
    return buf.getvalue()
