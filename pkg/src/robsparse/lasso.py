"""Weighted l1 coordinate descent.

Minimizes ``(1/2n) ||y - X b||^2 + lam * sum_j w_j |b_j|`` by cyclic
coordinate descent with residual updates, in ascending coordinate order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-7
    max_iter: int = 10_000
    active_set: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class SolveInfo:
    sweeps: int
    converged: bool


@numba.njit(cache=True)
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@numba.njit(cache=True)
def _sweep(X, r, b, colsq, thresh, active_only):
    n, m = X.shape
    max_delta = 0.0
    for j in range(m):
        bj = b[j]
        if active_only and bj == 0.0:
            continue
        acc = 0.0
        for i in range(n):
            acc += X[i, j] * r[i]
        new = _soft(acc / colsq[j] + bj, thresh[j])
        delta = new - bj
        if delta != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * delta
            b[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


@numba.njit(cache=True)
def cd_kernel(X, r, b, colsq, thresh, tol, max_iter, active_set):
    """In-place coordinate descent. `r` must equal ``y - X b`` on entry.

    Returns ``(sweeps, converged)``. Convergence means a full sweep moved no
    coordinate by more than `tol`.
    """
    sweeps = 0
    while sweeps < max_iter:
        delta = _sweep(X, r, b, colsq, thresh, False)
        sweeps += 1
        if delta <= tol:
            return sweeps, True
        if active_set:
            while sweeps < max_iter:
                delta = _sweep(X, r, b, colsq, thresh, True)
                sweeps += 1
                if delta <= tol:
                    break
    return sweeps, False


@numba.njit(cache=True)
def cd_extended_kernel(X, r, b, g, colsq, lam, sqrt_n, tol, max_iter, active_set):
    """Coordinate descent for the unit-weight Lasso on ``Z = (X, sqrt(n) I)``.

    ``b`` holds the X block, ``g`` the identity block; `r` must equal
    ``y - X b - sqrt(n) g`` on entry. A gamma coordinate has squared column
    norm n, so its update is ``g_i <- S(r_i / sqrt(n) + g_i, lam)``.
    """
    n, p = X.shape
    tb = np.empty(p)
    for j in range(p):
        tb[j] = n * lam / colsq[j]
    sweeps = 0
    active_only = False
    while sweeps < max_iter:
        delta = _sweep(X, r, b, colsq, tb, active_only)
        for i in range(n):
            gi = g[i]
            if active_only and gi == 0.0:
                continue
            new = _soft(r[i] / sqrt_n + gi, lam)
            d = new - gi
            if d != 0.0:
                r[i] -= sqrt_n * d
                g[i] = new
                if abs(d) > delta:
                    delta = abs(d)
        sweeps += 1
        if delta <= tol:
            if not active_only:
                return sweeps, True
            active_only = False
        elif active_set:
            active_only = True
    return sweeps, False


def _check_inputs(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("NaN or Inf in solver inputs")
    return X, y


def solve_weighted_lasso(X, y, lam, w=None, warm_start=None, opts=None, return_info=False):
    """Minimize ``(1/2n)||y - X b||^2 + lam * sum_j w_j |b_j|``.

    Parameters
    ----------
    X : (n, m) array; columns must be nonzero.
    y : (n,) array.
    lam : nonnegative float.
    w : (m,) nonnegative finite weights; defaults to ones.
    warm_start : optional (m,) starting point.
    opts : SolverOptions.
    return_info : also return a SolveInfo.

    A run that hits ``opts.max_iter`` emits ConvergenceWarning and returns the
    last iterate (``info.converged`` is False).
    """
    opts = opts or SolverOptions()
    X, y = _check_inputs(X, y)
    n, m = X.shape
    w = np.ones(m) if w is None else np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (m,) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a finite nonnegative m-vector")
    if not lam >= 0:
        raise ValueError("lam must be nonnegative")
    colsq = np.einsum("ij,ij->j", X, X)
    if np.any(colsq == 0):
        raise ValueError(f"zero column at index {int(np.flatnonzero(colsq == 0)[0])}")
    b = np.zeros(m) if warm_start is None else np.array(warm_start, dtype=float).reshape(-1)
    if b.shape != (m,):
        raise ValueError("warm_start has the wrong length")
    Xf = np.asfortranarray(X)
    r = y - Xf @ b
    thresh = n * lam * w / colsq
    sweeps, converged = cd_kernel(Xf, r, b, colsq, thresh, opts.tol, opts.max_iter, opts.active_set)
    if not converged:
        warnings.warn(f"coordinate descent did not converge in {sweeps} sweeps", ConvergenceWarning)
    if return_info:
        return b, SolveInfo(int(sweeps), bool(converged))
    return b


def kkt_residual(X, y, b, lam, w=None):
    """Largest violation of the subgradient optimality conditions at `b`."""
    X, y = _check_inputs(X, y)
    n, m = X.shape
    b = np.asarray(b, dtype=float)
    w = np.ones(m) if w is None else np.asarray(w, dtype=float)
    g = -(X.T @ (y - X @ b)) / n
    nz = b != 0
    viol = np.where(nz, np.abs(g + lam * w * np.sign(b)), np.maximum(0.0, np.abs(g) - lam * w))
    return float(viol.max()) if viol.size else 0.0


def lambda_max(X, y, w=None):
    """Smallest lam for which b = 0 is optimal. Unpenalized (w = 0) columns are ignored."""
    X, y = _check_inputs(X, y)
    n, m = X.shape
    w = np.ones(m) if w is None else np.asarray(w, dtype=float)
    corr = np.abs(X.T @ y) / n
    pen = w > 0
    if not np.any(pen):
        return 0.0
    return float(np.max(corr[pen] / w[pen]))


def lambda_grid(X, y, w=None, count=20, min_ratio=None):
    """Log-spaced descending grid from lambda_max down to ``min_ratio * lambda_max``.

    ``min_ratio`` defaults to 1e-3 when n > m and 1e-2 otherwise. If
    lambda_max is zero (e.g. y = 0) the grid collapses to ``[0.0]``.
    """
    if count < 2:
        raise ValueError("count must be >= 2")
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    if min_ratio is None:
        min_ratio = 1e-3 if n > m else 1e-2
    lmax = lambda_max(X, y, w)
    if lmax == 0.0:
        warnings.warn("lambda_max is zero (all-zero response?); returning the grid [0.0]")
        return np.array([0.0])
    return np.exp(np.linspace(math.log(lmax), math.log(lmax * min_ratio), count))
