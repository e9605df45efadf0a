"""Spectral analysis of the gap-update matrices.

The static law's gap vector evolves under P_k = I + U_k/6, a row-stochastic
tridiagonal matrix. P_k is self-adjoint in the weighted inner product
<x, y> = sum_i w_i x_i y_i with w = (3, 6, ..., 6, 3): equivalently,
diag(w) P is symmetric, because P_ij = w_ij / w_i for the edge weights of an
undirected line graph (unit self-loops at nodes 1, 2, k-1, k; weight-2 end
edges; weight-3 interior edges). Its spectrum is therefore real, the top
eigenvalue is 1 with the all-ones eigenvector, and the remaining eigenvalue
moduli are bounded by 1 - 1/(3 k^2), which fixes the static law's
convergence rate.

Eigenvalues are computed on the symmetrized tridiagonal matrix
S = D^{1/2} P D^{-1/2} by Sturm-sequence bisection: negative-pivot counts of
the shifted LDL^T recurrence bracket each eigenvalue individually, which is
robust, provably real, and O(k^2) for the tridiagonal structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError


@dataclass(frozen=True)
class TridiagonalSystem:
    """Gap-update stencil U, transition matrix P = I + U/6, and weights w."""

    k: int
    U: np.ndarray
    P: np.ndarray
    w: np.ndarray


def build_system(k: int) -> TridiagonalSystem:
    """Build the k-dimensional gap-update system (k >= 3).

    Stencil rows are integers divided by 6, so P is exact to one rounding:
    (-4, 4) at the ends, (2, -5, 3) next to the ends, (3, -6, 3) in the
    interior, with the special 3x3 case (-4, 4 / 2, -4, 2 / 4, -4).
    """
    if k < 3:
        raise DomainError("gap systems need dimension k >= 3")
    U = np.zeros((k, k))
    if k == 3:
        U[:] = [[-4, 4, 0], [2, -4, 2], [0, 4, -4]]
    else:
        U[0, 0:2] = [-4, 4]
        U[1, 0:3] = [2, -5, 3]
        for i in range(2, k - 2):
            U[i, i - 1:i + 2] = [3, -6, 3]
        U[k - 2, k - 3:k] = [3, -5, 2]
        U[k - 1, k - 2:k] = [4, -4]
    P = np.eye(k) + U / 6.0
    w = np.full(k, 6.0)
    w[0] = w[-1] = 3.0
    return TridiagonalSystem(k=k, U=U, P=P, w=w)


def _sturm_counts(diag: np.ndarray, off_sq: np.ndarray, shifts: np.ndarray,
                  pivmin: float) -> np.ndarray:
    """Number of eigenvalues strictly below each shift (negative LDL pivots)."""
    q = diag[0] - shifts
    counts = (q < 0.0).astype(np.int64)
    for i in range(1, diag.size):
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        q = diag[i] - shifts - off_sq[i - 1] / q
        counts += q < 0.0
    return counts


def tridiagonal_eigenvalues(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric tridiagonal matrix, ascending."""
    k = diag.size
    if k == 1:
        return diag.copy()
    off_sq = off * off
    pivmin = max(float(np.max(off_sq)), 1.0) * 1e-30
    radius = np.zeros(k)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo = np.full(k, float(np.min(diag - radius)) - 1e-12)
    hi = np.full(k, float(np.max(diag + radius)) + 1e-12)
    want = np.arange(1, k + 1)
    scale = max(1.0, float(np.max(np.abs(diag) + radius)))
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = _sturm_counts(diag, off_sq, mid, pivmin) >= want
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
        if float(np.max(hi - lo)) <= 1e-15 * scale:
            break
    return 0.5 * (lo + hi)


def spectrum(sys: TridiagonalSystem) -> np.ndarray:
    """Real eigenvalues of P, ascending (largest is 1).

    Works on S = D^{1/2} P D^{-1/2} with D = diag(w); S is symmetric
    tridiagonal by the weighted self-adjointness, which is verified before
    solving.
    """
    P, w = sys.P, sys.w
    sqrt_w = np.sqrt(w)
    S = (sqrt_w[:, None] * P) / sqrt_w[None, :]
    if float(np.max(np.abs(S - S.T))) > 1e-10:
        raise NumericError("weighted symmetrization failed: diag(w) P not symmetric")
    S = 0.5 * (S + S.T)
    diag = np.diag(S).copy()
    off = np.diag(S, 1).copy()
    return tridiagonal_eigenvalues(diag, off)


def predict_limit(sys: TridiagonalSystem, d0) -> float:
    """Common limit of all gap entries: the w-weighted mean of d(0).

    This is the projection of d(0) onto the all-ones eigenvector in the
    weighted inner product; for a valid gap vector of a field it equals
    F(1)/n, since sum_i w_i d_i = 6 F(1) and sum_i w_i = 6 (k - 1).
    """
    d0 = np.asarray(d0, dtype=float)
    if d0.shape != (sys.k,):
        raise DomainError(f"gap vector must have length {sys.k}")
    return float(np.dot(sys.w, d0) / np.sum(sys.w))
