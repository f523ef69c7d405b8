"""Lasso-type preliminary estimator on the extended design ``Z = (X, sqrt(n) I_n)``.

One tuning parameter ``lambda_theta`` penalizes coefficients and outlier
parameters alike. The thresholded variant keeps only coordinates with
``|theta_j| > tau_theta * lambda_theta``. Both are tuned by BIC.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .lasso import ConvergenceWarning, SolverOptions, cd_extended_kernel, lambda_grid

DEFAULT_TAU_GRID = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class PreliminaryFit:
    beta_tilde: np.ndarray
    gamma_tilde: np.ndarray
    lambda_theta: float
    tau_theta: float = 0.0
    thresholded: bool = False
    bic: float = None
    converged: bool = True

    @property
    def S_tilde(self):
        return np.flatnonzero(self.beta_tilde)

    @property
    def G_tilde(self):
        return np.flatnonzero(self.gamma_tilde)

    @property
    def support_size(self):
        return int(np.count_nonzero(self.beta_tilde) + np.count_nonzero(self.gamma_tilde))

    @property
    def degenerate(self):
        return not np.any(self.beta_tilde)


def extended_design(X):
    """Materialize ``Z = (X, sqrt(n) I_n)``. Only meant for small checks."""
    n = X.shape[0]
    return np.hstack([X, math.sqrt(n) * np.eye(n)])


def extended_lambda_max(dataset):
    n = dataset.n
    return max(float(np.max(np.abs(dataset.X.T @ dataset.y))) / n,
               float(np.max(np.abs(dataset.y))) / math.sqrt(n))


def fit_preliminary(dataset, lambda_theta, opts=None, warm_start=None):
    """Unit-weight Lasso on Z for a single ``lambda_theta`` > 0.

    The identity block is never materialized: each outlier coordinate is
    updated in closed form right after a sweep over the columns of X, the
    same visiting order generic coordinate descent on Z would use.
    """
    if not lambda_theta > 0:
        raise ValueError("lambda_theta must be positive")
    opts = opts or SolverOptions()
    X, y = dataset.X, dataset.y
    n = dataset.n
    sqrt_n = math.sqrt(n)
    if warm_start is None:
        b = np.zeros(dataset.p)
        g = np.zeros(n)
    else:
        b = np.array(warm_start[0], dtype=float)
        g = np.array(warm_start[1], dtype=float)
    Xf = np.asfortranarray(X)
    colsq = np.einsum("ij,ij->j", Xf, Xf)
    r = y - Xf @ b - sqrt_n * g
    sweeps, converged = cd_extended_kernel(
        Xf, r, b, g, colsq, float(lambda_theta), sqrt_n, opts.tol, opts.max_iter, opts.active_set
    )
    if not converged:
        warnings.warn(f"preliminary fit did not converge in {sweeps} sweeps", ConvergenceWarning)
    return PreliminaryFit(b, g, float(lambda_theta), converged=bool(converged))


def threshold_preliminary(fit, tau_theta):
    """Zero every coordinate with ``|theta_j| <= tau_theta * lambda_theta``."""
    if fit.thresholded:
        raise ValueError("fit is already thresholded")
    if not tau_theta >= 0:
        raise ValueError("tau_theta must be nonnegative")
    cut = tau_theta * fit.lambda_theta
    b = np.where(np.abs(fit.beta_tilde) > cut, fit.beta_tilde, 0.0)
    g = np.where(np.abs(fit.gamma_tilde) > cut, fit.gamma_tilde, 0.0)
    return replace(fit, beta_tilde=b, gamma_tilde=g, tau_theta=float(tau_theta), thresholded=True, bic=None)


def preliminary_bic(dataset, fit):
    """``(1/2n)||y - Z theta||^2 + (log n / n) |supp(theta)|``."""
    n = dataset.n
    r = dataset.y - dataset.X @ fit.beta_tilde - math.sqrt(n) * fit.gamma_tilde
    return float(r @ r / (2 * n) + math.log(n) / n * fit.support_size)


def default_lambda_theta_grid(dataset, count=20, min_ratio=1e-2):
    lmax = extended_lambda_max(dataset)
    if lmax == 0.0:
        raise ValueError("all-zero response: the preliminary path is identically zero")
    return np.exp(np.linspace(math.log(lmax), math.log(lmax * min_ratio), count))


def preliminary_path(dataset, grid_lambda_theta, opts=None):
    """Warm-started fits along `grid_lambda_theta`, visited in descending order."""
    grid = sorted((float(v) for v in grid_lambda_theta), reverse=True)
    fits = []
    warm = None
    for lam in grid:
        fit = fit_preliminary(dataset, lam, opts, warm_start=warm)
        warm = (fit.beta_tilde, fit.gamma_tilde)
        fits.append(fit)
    return fits


def select_preliminary(dataset, grid_lambda_theta=None, grid_tau_theta=DEFAULT_TAU_GRID,
                       use_threshold=False, opts=None, path=None, grid_size=20):
    """BIC-tuned preliminary fit.

    Candidates are visited from the largest penalty down (and from the largest
    tau down when thresholding); a candidate replaces the incumbent only on a
    strictly smaller BIC, so ties go to the sparser model. If every candidate
    has an empty coefficient support, the least-penalized one is returned with
    a warning.
    """
    if path is None:
        if grid_lambda_theta is None:
            grid_lambda_theta = default_lambda_theta_grid(dataset, grid_size)
        if len(grid_lambda_theta) == 0:
            raise ValueError("empty lambda_theta grid")
        path = preliminary_path(dataset, grid_lambda_theta, opts)
    taus = sorted((float(t) for t in grid_tau_theta), reverse=True) if use_threshold else [None]
    if not taus:
        raise ValueError("empty tau_theta grid")

    best, best_bic, last = None, math.inf, None
    for fit in path:
        for tau in taus:
            cand = fit if tau is None else threshold_preliminary(fit, tau)
            bic = preliminary_bic(dataset, cand)
            cand = replace(cand, bic=bic)
            last = cand
            if cand.degenerate:
                continue
            if bic < best_bic:
                best, best_bic = cand, bic
    if best is None:
        warnings.warn("every preliminary candidate has an empty coefficient support")
        return last
    return best
