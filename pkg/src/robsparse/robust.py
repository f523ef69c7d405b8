"""Alternating minimization over coefficients and outlier parameters.

Given a preliminary fit, coefficients live on its coefficient support S and
outlier parameters on its outlier support G; everything else is held at zero.
Each outer iteration solves a weighted Lasso in beta with the current outlier
shift removed from the response, then updates every outlier parameter in
closed form with the thresholding rule.
"""
from __future__ import annotations

import math

import numpy as np

from .core import DegenerateFitError, FitResult, Weights
from .lasso import SolverOptions, cd_kernel


def compute_weights(prelim, R_w=100.0):
    """Adaptive weights ``max(1/|beta_j|, 1/R_w)`` on S and ``min(1/|gamma_i|, R_w)`` on G."""
    if not R_w > 0:
        raise ValueError("R_w must be positive")
    S = prelim.S_tilde
    if S.size == 0:
        raise DegenerateFitError("preliminary coefficient support is empty; nothing to estimate")
    G = prelim.G_tilde
    w_beta = np.maximum(1.0 / np.abs(prelim.beta_tilde[S]), 1.0 / R_w)
    w_gamma = np.minimum(1.0 / np.abs(prelim.gamma_tilde[G]), R_w)
    return Weights(S, w_beta, G, w_gamma, R_w)


def gamma_step(residuals, rule, lambda_gamma, weights):
    """``gamma_i = theta(r_i; lambda_gamma * w_gamma_i) / sqrt(n)`` on G, zero elsewhere."""
    r = np.asarray(residuals, dtype=float)
    n = r.shape[0]
    gamma = np.zeros(n)
    G = weights.support_gamma
    if G.size:
        gamma[G] = rule.theta(r[G], lambda_gamma * weights.w_gamma) / math.sqrt(n)
    return gamma


def fit(dataset, prelim, rule, tuning, R_w=100.0, beta_init=None, stop_tol=1e-3, max_outer=100,
        weights=None, solver_opts=None, keep_path=False):
    """Run the alternating algorithm for one ``(lambda_beta, lambda_gamma)`` pair.

    Parameters
    ----------
    dataset : Dataset
    prelim : PreliminaryFit
        Supplies the supports, the default weights and the default start.
    rule : ThresholdingRule
    tuning : TuningParams
    R_w : float
        Weight cap, used only when `weights` is not given.
    beta_init : optional p-vector
        Start for beta; defaults to the preliminary coefficients. Only its
        entries on the preliminary support are used.
    stop_tol : float
        Stop once ``||beta^k - beta^{k-1}||_1 / |S| <= stop_tol``.
    max_outer : int
    weights : optional Weights, overriding ``compute_weights(prelim, R_w)``.
    solver_opts : SolverOptions for the inner Lasso solves.
    keep_path : store every beta iterate in ``result.beta_path``.

    Returns
    -------
    FitResult whose ``objective_trace`` is
    ``[L(b0, g0), L(b1, g0), L(b1, g1), L(b2, g1), ...]``.
    """
    weights = weights if weights is not None else compute_weights(prelim, R_w)
    opts = solver_opts or SolverOptions()
    S = weights.support_beta
    if S.size == 0:
        raise DegenerateFitError("empty coefficient support")
    n, p = dataset.n, dataset.p
    sqrt_n = math.sqrt(n)
    y = dataset.y
    XS = np.asfortranarray(dataset.X[:, S])
    colsq = np.einsum("ij,ij->j", XS, XS)
    lb = tuning.lambda_beta
    thresh = n * lb * weights.w_beta / colsq
    G = weights.support_gamma
    g_thresh = tuning.lambda_gamma * weights.w_gamma

    start = prelim.beta_tilde if beta_init is None else np.asarray(beta_init, dtype=float)
    b = np.array(start[S], dtype=float)

    def gamma_of(b):
        r = y - XS @ b
        g = np.zeros(n)
        if G.size:
            g[G] = rule.theta(r[G], g_thresh) / sqrt_n
        return g

    def L(b, g):
        r = y - XS @ b - sqrt_n * g
        value = r @ r / (2 * n) + lb * np.sum(weights.w_beta * np.abs(b))
        if G.size:
            value += np.sum(rule.penalty(sqrt_n * g[G], g_thresh)) / n
        return float(value)

    g = gamma_of(b)
    trace = [L(b, g)]
    path = [b.copy()] if keep_path else None
    converged = False
    k = 0
    for k in range(1, max_outer + 1):
        b_old = b.copy()
        r = y - sqrt_n * g - XS @ b
        cd_kernel(XS, r, b, colsq, thresh, opts.tol, opts.max_iter, opts.active_set)
        trace.append(L(b, g))
        g = gamma_of(b)
        trace.append(L(b, g))
        if keep_path:
            path.append(b.copy())
        if np.sum(np.abs(b - b_old)) / S.size <= stop_tol:
            converged = True
            break

    beta = np.zeros(p)
    beta[S] = b
    if keep_path:
        full = []
        for bk in path:
            v = np.zeros(p)
            v[S] = bk
            full.append(v)
        path = full
    return FitResult(
        beta=beta,
        gamma=g,
        objective_trace=trace,
        iterations=k,
        tuning=tuning,
        rule_name=rule.name,
        converged=converged,
        beta_path=path,
    )


def estimating_equation_residual(dataset, fit_result, rule, tuning, weights):
    """Largest violation of the M-estimator estimating equations at the fitted beta.

    For j on the coefficient support the score is
    ``s_j = (1/n) sum_i x_ij psi_i`` with ``psi_i = psi(r_i; lambda_gamma w_i)``
    on G and ``psi_i = r_i`` off G. At a fixed point ``s_j = lambda_beta w_j
    sgn(beta_j)`` when ``beta_j != 0`` and ``|s_j| <= lambda_beta w_j``
    otherwise.
    """
    n = dataset.n
    beta = np.asarray(fit_result.beta, dtype=float)
    r = dataset.y - dataset.X @ beta
    psi_vec = r.copy()
    G = weights.support_gamma
    if G.size:
        psi_vec[G] = rule.psi(r[G], tuning.lambda_gamma * weights.w_gamma)
    S = weights.support_beta
    score = dataset.X[:, S].T @ psi_vec / n
    bS = beta[S]
    lw = tuning.lambda_beta * weights.w_beta
    viol = np.where(bS != 0, np.abs(score - lw * np.sign(bS)), np.maximum(0.0, np.abs(score) - lw))
    return float(viol.max()) if viol.size else 0.0
