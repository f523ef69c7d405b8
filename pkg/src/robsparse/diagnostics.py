"""Brute-force restricted eigenvalues for small designs.

Only meant for test oracles and teaching examples: the supports are
enumerated exhaustively, so sizes are capped (p <= 12, n <= 14 and at most
MAX_BLOCKS eigenproblems per call).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numba
import numpy as np

from .core import GuardError

MAX_P = 12
MAX_N = 14
MAX_BLOCKS = 200_000
JACOBI_TOL = 1e-12


@numba.njit(cache=True)
def jacobi_eigenvalues(A, tol=1e-12, max_sweeps=100):
    """Eigenvalues of the symmetric matrix `A` by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is below
    ``tol * max(1, ||A||_F)``. Returns the (unsorted) diagonal.
    """
    a = A.copy()
    k = a.shape[0]
    scale = 0.0
    for i in range(k):
        for j in range(k):
            scale += a[i, j] * a[i, j]
    scale = max(1.0, math.sqrt(scale))
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                off += 2.0 * a[i, j] * a[i, j]
        if math.sqrt(off) <= tol * scale:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for r in range(k):
                    arp = a[r, p]
                    arq = a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[r, q] = s * arp + c * arq
                for r in range(k):
                    apr = a[p, r]
                    aqr = a[q, r]
                    a[p, r] = c * apr - s * aqr
                    a[q, r] = s * apr + c * aqr
    out = np.empty(k)
    for i in range(k):
        out[i] = a[i, i]
    return out


@numba.njit(cache=True)
def _extreme_over_supports(gram, supports, want_max, tol):
    u = supports.shape[1]
    best = -np.inf if want_max else np.inf
    block = np.empty((u, u))
    for b in range(supports.shape[0]):
        for i in range(u):
            for j in range(u):
                block[i, j] = gram[supports[b, i], supports[b, j]]
        ev = jacobi_eigenvalues(block, tol)
        if want_max:
            v = ev.max()
            if v > best:
                best = v
        else:
            v = ev.min()
            if v < best:
                best = v
    return best


def _combos(m, k):
    return np.array(list(itertools.combinations(range(m), k)), dtype=np.int64).reshape(-1, k)


def _check_X(X, need_rows=False):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-d")
    n, p = X.shape
    if p > MAX_P:
        raise GuardError(f"p = {p} exceeds the enumeration limit p <= {MAX_P}; "
                         "restricted eigenvalues are brute-forced over all supports")
    if need_rows and n > MAX_N:
        raise GuardError(f"n = {n} exceeds the enumeration limit n <= {MAX_N} for row subsets")
    return X


def _check_size(u, limit, label):
    if not 1 <= u:
        raise ValueError(f"{label} must be >= 1")
    return min(u, limit)


def restricted_min_eigenvalue(X, u):
    """``min_{|T| = u} lambda_min(X_T' X_T / n)``, equal to the infimum of
    ``||X d||^2 / (n ||d||^2)`` over d with at most u nonzeros."""
    X = _check_X(X)
    n, p = X.shape
    u = _check_size(u, p, "u")
    if math.comb(p, u) > MAX_BLOCKS:
        raise GuardError(f"C({p},{u}) supports exceeds MAX_BLOCKS={MAX_BLOCKS}")
    gram = X.T @ X / n
    return float(_extreme_over_supports(gram, _combos(p, u), False, JACOBI_TOL))


def restricted_max_eigenvalue(X, u, u_prime):
    """``max_{|T| <= u, |G| <= u'} lambda_max(X_{G,T}' X_{G,T} / n)``.

    Enlarging T or G cannot lower the largest eigenvalue, so only
    ``|T| = min(u, p)`` and ``|G| = min(u', n)`` are enumerated.
    """
    X = _check_X(X, need_rows=True)
    n, p = X.shape
    u = _check_size(u, p, "u")
    up = _check_size(u_prime, n, "u_prime")
    blocks = math.comb(p, u) * math.comb(n, up)
    if blocks > MAX_BLOCKS:
        raise GuardError(f"{blocks} eigenproblems exceeds MAX_BLOCKS={MAX_BLOCKS}; reduce u or u'")
    cols = _combos(p, u)
    best = -np.inf
    for G in itertools.combinations(range(n), up):
        XG = X[list(G)]
        best = max(best, _extreme_over_supports(XG.T @ XG / n, cols, True, JACOBI_TOL))
    return float(best)


def bound_35(X, u, u_prime):
    """``max_ij x_ij^2 * u * u' / n``, an upper bound for the restricted max eigenvalue."""
    X = np.asarray(X, dtype=float)
    return float(np.max(X * X) * u * u_prime / X.shape[0])


def contraction_factor(X, s_tilde, g_tilde, kappa):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return 2.0 * restricted_max_eigenvalue(X, s_tilde, g_tilde) / kappa


@dataclass
class EigenReport:
    delta_min: float
    delta_max: float
    rho: float
    bound_35: float
    supports_examined: int
    kappa: float
    rho_ge_one: bool

    def as_dict(self):
        return asdict(self)


def eigen_report(X, u, u_prime, kappa=None):
    """All diagnostics for supports of size `u` and row sets of size `u_prime`.

    Without `kappa`, the contraction factor uses ``kappa = delta_min(u)``,
    the largest value compatible with the restricted-eigenvalue assumption;
    rho is None when that is zero.
    """
    X = _check_X(X, need_rows=True)
    n, p = X.shape
    dmin = restricted_min_eigenvalue(X, u)
    dmax = restricted_max_eigenvalue(X, u, u_prime)
    uu, uup = min(u, p), min(u_prime, n)
    examined = math.comb(p, uu) + math.comb(p, uu) * math.comb(n, uup)
    k = dmin if kappa is None else float(kappa)
    if k is not None and not k >= 0:
        raise ValueError("kappa must be positive")
    rho = 2.0 * dmax / k if k > 0 else None
    return EigenReport(
        delta_min=dmin,
        delta_max=dmax,
        rho=rho,
        bound_35=bound_35(X, u, u_prime),
        supports_examined=examined,
        kappa=k,
        rho_ge_one=bool(rho is None or rho >= 1.0),
    )
