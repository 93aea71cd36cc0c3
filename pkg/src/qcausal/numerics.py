"""Shared numerical kernels: entropies, a Jacobi eigensolver, stationary
distributions and majorization.

All logarithms are base 2, so every entropy returned here is in bits.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix, issparse
from scipy.sparse.csgraph import connected_components

# Slack used when checking that probabilities lie in [0, 1].
PROB_SLACK = 1e-12
# Negative eigenvalues of density matrices down to -CLAMP_TOL are treated as 0.
CLAMP_TOL = 1e-10

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
# Larger matrices go to LAPACK; the rotation loop is Python-level and scales as n^2 per sweep.
JACOBI_MAX_DIM = 256


class ConvergenceError(RuntimeError):
    """An iterative kernel hit its iteration cap."""


class ReducibleChainError(ValueError):
    """A Markov chain has more than one recurrent class."""

    def __init__(self, classes):
        self.classes = [list(c) for c in classes]
        super().__init__(f"chain has {len(self.classes)} recurrent classes: {self.classes}")


def _xlog2x(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def binary_entropy(x: float) -> float:
    """Binary entropy h(x) in bits, with 0 log 0 = 0."""
    if not (-PROB_SLACK <= x <= 1 + PROB_SLACK):
        raise ValueError(f"binary_entropy: {x} is outside [0, 1]")
    x = min(max(float(x), 0.0), 1.0)
    return float(-_xlog2x(np.array([x, 1.0 - x])).sum())


def check_distribution(p, tol: float = PROB_SLACK) -> np.ndarray:
    """Return ``p`` as a float array, raising if it is not a probability vector."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(p)) or np.any(p < -tol):
        raise ValueError(f"probability vector has negative or non-finite entries: {p}")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probability vector sums to {p.sum()!r}, not 1")
    return np.clip(p, 0.0, None)


def shannon_entropy(p) -> float:
    """Shannon entropy -sum p log2 p of a probability vector."""
    p = check_distribution(p, tol=1e-9)
    return float(-_xlog2x(p).sum())


def _jacobi(a: np.ndarray, vectors: bool, tol: float, max_sweeps: int):
    """Cyclic Jacobi on a stack of symmetric matrices of shape (..., n, n)."""
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[-1]
    batch = a.shape[:-2]
    a = a.reshape((-1, n, n))
    v = np.broadcast_to(np.eye(n), a.shape).copy() if vectors else None

    scale = np.sqrt(np.einsum("kij,kij->k", a, a))
    threshold = tol * np.maximum(scale, 1.0)
    offdiag = ~np.eye(n, dtype=bool)

    def off_norm():
        return np.sqrt((a[:, offdiag] ** 2).sum(axis=1))

    sweeps = 0
    while True:
        active = off_norm() > threshold
        if not active.any():
            break
        if sweeps >= max_sweeps:
            raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
        sweeps += 1
        idx = np.flatnonzero(active)
        sub = a[idx]
        subv = v[idx] if vectors else None
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = sub[:, p, q]
                # entries this small cannot move an eigenvalue at JACOBI_TOL; rotating them would overflow theta
                rot = np.abs(apq) > 1e-18 * (np.abs(sub[:, p, p]) + np.abs(sub[:, q, q])) + 1e-300
                if not rot.any():
                    continue
                safe = np.where(rot, apq, 1.0)
                theta = (sub[:, q, q] - sub[:, p, p]) / (2.0 * safe)
                t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(theta == 0.0, 1.0, t)
                t = np.where(rot, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cc = c[:, None]
                ss = s[:, None]
                col_p = sub[:, :, p].copy()
                col_q = sub[:, :, q]
                sub[:, :, p] = cc * col_p - ss * col_q
                sub[:, :, q] = ss * col_p + cc * col_q
                row_p = sub[:, p, :].copy()
                row_q = sub[:, q, :]
                sub[:, p, :] = cc * row_p - ss * row_q
                sub[:, q, :] = ss * row_p + cc * row_q
                sub[:, p, q] = 0.0
                sub[:, q, p] = 0.0
                if vectors:
                    vp = subv[:, :, p].copy()
                    vq = subv[:, :, q]
                    subv[:, :, p] = cc * vp - ss * vq
                    subv[:, :, q] = ss * vp + cc * vq
        a[idx] = sub
        if vectors:
            v[idx] = subv

    w = np.diagonal(a, axis1=1, axis2=2).copy()
    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1).reshape(batch + (n,))
    if not vectors:
        return w
    v = np.take_along_axis(v, order[:, None, :], axis=2).reshape(batch + (n, n))
    return w, v


def _check_symmetric(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2] or m.shape[-1] == 0:
        raise ValueError(f"expected square matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(m - np.swapaxes(m, -1, -2)), initial=0.0) > 1e-12:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def symmetric_eigenvalues(m, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix, sorted descending.

    Uses cyclic Jacobi rotations. A stack of matrices with shape (..., n, n)
    is diagonalized in one batched pass and gives eigenvalues of shape (..., n).
    Raises ``ConvergenceError`` when the off-diagonal norm is still above
    ``tol`` (relative to the Frobenius norm) after ``max_sweeps`` sweeps.
    Matrices larger than ``JACOBI_MAX_DIM`` are handed to ``numpy.linalg.eigvalsh``.
    """
    m = _check_symmetric(m)
    if m.shape[-1] > JACOBI_MAX_DIM:
        return np.linalg.eigvalsh(m)[..., ::-1]
    return _jacobi(m, False, tol, max_sweeps)


def symmetric_eigh(m, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Like :func:`symmetric_eigenvalues` but also returns eigenvectors as columns."""
    m = _check_symmetric(m)
    if m.shape[-1] > JACOBI_MAX_DIM:
        w, v = np.linalg.eigh(m)
        return w[..., ::-1], v[..., ::-1]
    return _jacobi(m, True, tol, max_sweeps)


def hermitian_eigenvalues(h) -> np.ndarray:
    """Eigenvalues of a complex Hermitian matrix (or stack), descending.

    The n x n Hermitian matrix A + iB is embedded as the real symmetric
    2n x 2n block matrix [[A, -B], [B, A]], whose spectrum is that of the
    original with every eigenvalue doubled.
    """
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), initial=0.0) > 1e-12:
        raise ValueError("matrix is not Hermitian")
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    w = symmetric_eigenvalues(np.concatenate([top, bottom], axis=-2))
    return w[..., ::2]


def von_neumann_entropy(spectrum, clamp_tol: float = CLAMP_TOL) -> float:
    """Entropy -sum lambda log2 lambda of a density-operator spectrum."""
    lam = np.asarray(spectrum, dtype=float)
    if np.any(lam < -clamp_tol):
        raise ValueError(f"spectrum has eigenvalues below -{clamp_tol}: {lam.min()!r}")
    if abs(lam.sum() - 1.0) > 1e-6:
        raise ValueError(f"spectrum sums to {lam.sum()!r}, not 1")
    lam = np.clip(lam, 0.0, None)
    return float(-_xlog2x(lam).sum())


def majorizes(a, b, tol: float = 1e-9) -> bool:
    """True iff spectrum ``a`` majorizes ``b`` (both sorted descending).

    The shorter vector is padded with zeros. Totals must agree within ``tol``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    if abs(a.sum() - b.sum()) > tol:
        raise ValueError(f"cannot compare spectra with totals {a.sum()!r} and {b.sum()!r}")
    return bool(np.all(np.cumsum(a) >= np.cumsum(b) - tol))


def recurrent_classes(t) -> list[list[int]]:
    """Closed communicating classes of the directed graph ``t > 0`` (dense or scipy sparse)."""
    adj = csr_matrix(t) if issparse(t) else csr_matrix(np.asarray(t) > 0)
    adj.eliminate_zeros()
    _, labels = connected_components(adj, directed=True, connection="strong")
    coo = adj.tocoo()
    leaking = np.zeros(labels.max() + 1, dtype=bool)
    leaking[labels[coo.row][labels[coo.row] != labels[coo.col]]] = True
    return [np.flatnonzero(labels == lab).tolist() for lab in range(labels.max() + 1) if not leaking[lab]]


def stationary_distribution(t, tol: float = 1e-12, max_steps: int = 1_000_000) -> np.ndarray:
    """Stationary distribution pi with pi T = pi of a row-stochastic matrix.

    The null space of (T - I)^T plus normalization is solved by least squares.
    If the residual is not below ``tol`` the answer is polished by power
    iteration on consecutive-iterate averages, which also settles periodic
    chains. Raises ``ReducibleChainError`` for several recurrent classes.
    """
    t = np.asarray(t, dtype=float)
    n = t.shape[0]
    if t.shape != (n, n) or n == 0:
        raise ValueError(f"transition matrix must be square, got {t.shape}")
    if np.any(t < -PROB_SLACK) or np.max(np.abs(t.sum(axis=1) - 1.0)) > 1e-9:
        raise ValueError("transition matrix is not row-stochastic")
    classes = recurrent_classes(t)
    if len(classes) > 1:
        raise ReducibleChainError(classes)

    a = np.vstack([t.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(a, rhs, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.max(np.abs(pi @ t - pi)) < tol:
        return pi

    for _ in range(max_steps):
        nxt = pi @ t
        avg = 0.5 * (pi + nxt)
        avg /= avg.sum()
        if np.max(np.abs(avg @ t - avg)) < tol:
            return avg
        pi = avg
    raise ConvergenceError("stationary distribution did not converge")
