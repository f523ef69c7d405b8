"""BIC tuning of the alternating algorithm and the two-stage pipeline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import robust
from .core import DegenerateFitError, PipelineError, RobsparseError, TuningParams
from .lasso import SolverOptions, lambda_grid
from .preliminary import DEFAULT_TAU_GRID, default_lambda_theta_grid, preliminary_path, select_preliminary


class SelectionError(RobsparseError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def bic_terms(dataset, beta, gamma):
    """Return ``(fit_term, complexity_term)`` of the BIC score."""
    n = dataset.n
    r = dataset.y - dataset.X @ np.asarray(beta, float) - math.sqrt(n) * np.asarray(gamma, float)
    k = np.count_nonzero(beta) + np.count_nonzero(gamma)
    return float(r @ r / (2 * n)), float(math.log(n) / n * k)


def bic_score(dataset, beta, gamma):
    """``(1/2n)||y - X beta - sqrt(n) gamma||^2 + (log n / n)(|supp beta| + |supp gamma|)``."""
    fit_term, complexity = bic_terms(dataset, beta, gamma)
    return fit_term + complexity


def default_beta_grid(dataset, prelim, weights, count=20, min_ratio=None):
    """Lasso grid for the coefficient step on the preliminary support, computed
    from the working response ``y - sqrt(n) gamma_tilde``."""
    S = weights.support_beta
    work = dataset.y - math.sqrt(dataset.n) * prelim.gamma_tilde
    return lambda_grid(dataset.X[:, S], work, weights.w_beta, count, min_ratio)


def default_gamma_grid(dataset, prelim, weights, count=20):
    """Grid such that ``lambda_gamma * max(w_gamma)`` runs from ``max|r|`` down to
    ``median|r|``, where r are the preliminary residuals ``y - X beta_tilde``."""
    if weights.support_gamma.size == 0:
        return np.array([0.0])
    r = np.abs(dataset.y - dataset.X @ prelim.beta_tilde)
    wmax = float(np.max(weights.w_gamma))
    hi = float(np.max(r))
    lo = float(np.median(r))
    if hi == 0.0:
        return np.array([0.0])
    if not 0 < lo < hi:
        lo = hi * 1e-3
    return np.exp(np.linspace(math.log(hi), math.log(lo), count)) / wmax


def select_fit(dataset, prelim, rule, grid_beta=None, grid_gamma=None, R_w=100.0, stop_tol=1e-3,
               max_outer=100, solver_opts=None, warm_start=False, grid_size=20, weights=None):
    """Run the alternating algorithm over the ``(lambda_beta, lambda_gamma)`` grid
    and return the BIC minimizer among converged fits.

    Every fit starts from the preliminary coefficients unless `warm_start` is
    set, in which case each fit along a lambda_beta row starts from the
    previous one. Grids are visited from large to small and only a strictly
    better BIC replaces the incumbent, so ties favour sparser fits.
    """
    weights = weights if weights is not None else robust.compute_weights(prelim, R_w)
    if grid_beta is None:
        grid_beta = default_beta_grid(dataset, prelim, weights, grid_size)
    if grid_gamma is None:
        grid_gamma = default_gamma_grid(dataset, prelim, weights, grid_size)
    grid_beta = sorted((float(v) for v in grid_beta), reverse=True)
    grid_gamma = sorted((float(v) for v in grid_gamma), reverse=True)
    if not grid_beta or not grid_gamma:
        raise ValueError("empty tuning grid")

    best, best_bic = None, math.inf
    diagnostics = []
    for lg in grid_gamma:
        init = None
        for lb in grid_beta:
            tuning = TuningParams(lb, lg, prelim.lambda_theta, prelim.tau_theta)
            res = robust.fit(dataset, prelim, rule, tuning, beta_init=init, stop_tol=stop_tol,
                             max_outer=max_outer, weights=weights, solver_opts=solver_opts)
            if warm_start:
                init = res.beta
            res.bic = bic_score(dataset, res.beta, res.gamma)
            diagnostics.append((lb, lg, res.iterations, res.converged, res.bic))
            if res.converged and res.bic < best_bic:
                best, best_bic = res, res.bic
    if best is None:
        raise SelectionError("no grid point converged", diagnostics)
    return best


@dataclass
class PipelineConfig:
    """Settings for :func:`full_pipeline`. Grid arguments left as None are
    built from the data with `grid_size` points each."""

    prelim: str = "pre"
    R_w: float = 100.0
    grid_size: int = 20
    grid_lambda_theta: list = None
    grid_tau_theta: tuple = DEFAULT_TAU_GRID
    grid_beta: list = None
    grid_gamma: list = None
    stop_tol: float = 1e-3
    max_outer: int = 100
    solver_tol: float = 1e-7
    warm_start: bool = False

    def __post_init__(self):
        if self.prelim not in ("pre", "thpre"):
            raise ValueError(f"prelim must be 'pre' or 'thpre', got {self.prelim!r}")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")

    def solver_options(self):
        return SolverOptions(tol=self.solver_tol)

    def as_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            out[k] = list(v) if isinstance(v, (tuple, np.ndarray)) else v
        return out


@dataclass
class PipelineResult:
    prelim: object
    weights: object
    fit: object
    config: PipelineConfig
    grids: dict = field(default_factory=dict)


def full_pipeline(dataset, rule, config=None, path=None):
    """Preliminary estimate, adaptive weights, then BIC-tuned alternating fit.

    `path` may carry a precomputed preliminary path to share between the two
    preliminary variants. Failures are raised as PipelineError tagged with
    the stage: "preliminary", "weights" or "fit".
    """
    config = config or PipelineConfig()
    opts = config.solver_options()
    try:
        grid_theta = config.grid_lambda_theta
        if path is None:
            if grid_theta is None:
                grid_theta = default_lambda_theta_grid(dataset, config.grid_size)
            path = preliminary_path(dataset, grid_theta, opts)
        prelim = select_preliminary(dataset, grid_tau_theta=config.grid_tau_theta,
                                    use_threshold=config.prelim == "thpre", path=path)
    except (ValueError, RobsparseError) as exc:
        raise PipelineError("preliminary", str(exc)) from exc
    if prelim.degenerate:
        raise PipelineError("preliminary", "preliminary estimate has an empty coefficient support")
    try:
        weights = robust.compute_weights(prelim, config.R_w)
    except DegenerateFitError as exc:
        raise PipelineError("weights", str(exc)) from exc
    grid_beta = config.grid_beta
    if grid_beta is None:
        grid_beta = default_beta_grid(dataset, prelim, weights, config.grid_size)
    grid_gamma = config.grid_gamma
    if grid_gamma is None:
        grid_gamma = default_gamma_grid(dataset, prelim, weights, config.grid_size)
    try:
        result = select_fit(dataset, prelim, rule, grid_beta, grid_gamma, config.R_w, config.stop_tol,
                            config.max_outer, opts, config.warm_start, weights=weights)
    except (ValueError, RobsparseError) as exc:
        raise PipelineError("fit", str(exc)) from exc
    grids = {
        "lambda_theta": [f.lambda_theta for f in path],
        "tau_theta": list(config.grid_tau_theta) if config.prelim == "thpre" else [],
        "lambda_beta": [float(v) for v in grid_beta],
        "lambda_gamma": [float(v) for v in grid_gamma],
    }
    return PipelineResult(prelim=prelim, weights=weights, fit=result, config=config, grids=grids)
