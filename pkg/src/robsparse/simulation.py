"""Monte Carlo experiments: data generation, baselines, metrics and the runner.

Random numbers come from numpy's PCG64 generator. Normals are drawn with
``Generator.standard_normal`` (ziggurat method), in this fixed order per
replication: the n x p innovations of the covariate recursion, the support of
beta* and its signs, the outlier positions, then the noise vector. Replication
``r`` of a run with master seed ``s`` uses ``SeedSequence([s, r])``, so serial
and parallel runs see identical data.
"""
from __future__ import annotations

import csv
import io
import math
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, normalize_columns
from .lasso import ConvergenceWarning, SolverOptions, cd_kernel, lambda_grid
from .preliminary import default_lambda_theta_grid, preliminary_path, select_preliminary
from .selection import PipelineConfig, full_pipeline
from .thresholding import get_rule

CSV_COLUMNS = ("prelim", "outlier_pct", "rule", "sq_l2_error", "fp", "tp", "support_size", "coverage")


@dataclass(frozen=True)
class Scenario:
    n: int = 200
    p: int = 200
    s_star: int = 10
    g_star: int = 10
    outlier_magnitude: float = 8.0
    rho_cov: float = 0.3
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if not 0 <= self.s_star <= self.p:
            raise ValueError("need 0 <= s_star <= p")
        if not 0 <= self.g_star <= self.n:
            raise ValueError("need 0 <= g_star <= n")
        if not math.isfinite(self.outlier_magnitude):
            raise ValueError("outlier_magnitude must be finite")
        if not -1 < self.rho_cov < 1:
            raise ValueError("rho_cov must lie in (-1, 1)")
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    @classmethod
    def from_pct(cls, n, p, s_star, outlier_pct, **kw):
        return cls(n=n, p=p, s_star=s_star, g_star=int(round(n * outlier_pct / 100.0)), **kw)

    @property
    def outlier_pct(self):
        return 100.0 * self.g_star / self.n

    def with_seed(self, seed):
        return Scenario(self.n, self.p, self.s_star, self.g_star, self.outlier_magnitude,
                        self.rho_cov, self.sigma, seed)


@dataclass(frozen=True)
class GroundTruth:
    beta_star: np.ndarray
    gamma_star: np.ndarray

    @property
    def S_star(self):
        return np.flatnonzero(self.beta_star)

    @property
    def G_star(self):
        return np.flatnonzero(self.gamma_star)


@dataclass(frozen=True)
class Metrics:
    sq_l2_error: float
    fp: int
    tp: int
    support_size_prelim: int = None
    coverage: bool = None


def _rng(seed):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.default_rng(seed)


def ar1_design(rng, n, p, rho):
    """Rows with covariance ``rho^|i-j|`` via ``w_t = rho w_{t-1} + sqrt(1 - rho^2) z_t``."""
    Z = rng.standard_normal((n, p))
    W = np.empty_like(Z)
    W[:, 0] = Z[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for t in range(1, p):
        W[:, t] = rho * W[:, t - 1] + c * Z[:, t]
    return W


def generate(scenario, seed=None):
    """Draw one dataset from `scenario`. `seed` (an int or SeedSequence)
    overrides ``scenario.seed``."""
    sc = scenario
    rng = _rng(sc.seed if seed is None else seed)
    n, p = sc.n, sc.p
    X, _ = normalize_columns(ar1_design(rng, n, p, sc.rho_cov))
    beta = np.zeros(p)
    S = np.sort(rng.choice(p, size=sc.s_star, replace=False))
    u = rng.standard_normal(sc.s_star)
    beta[S] = np.where(u >= 0, 1.0, -1.0)
    gamma = np.zeros(n)
    G = np.sort(rng.choice(n, size=sc.g_star, replace=False))
    gamma[G] = sc.outlier_magnitude / math.sqrt(n)
    eps = rng.standard_normal(n)
    y = X @ beta + math.sqrt(n) * gamma + sc.sigma * eps
    return Dataset(y=y, X=X), GroundTruth(beta, gamma)


def evaluate(fit_beta, prelim, truth):
    beta = np.asarray(fit_beta, dtype=float)
    if beta.shape != truth.beta_star.shape:
        raise ValueError("fit_beta and beta_star differ in length")
    d = beta - truth.beta_star
    selected = beta != 0
    active = truth.beta_star != 0
    tp = int(np.count_nonzero(selected & active))
    fp = int(np.count_nonzero(selected & ~active))
    size = cov = None
    if prelim is not None:
        size = prelim.support_size
        cov = bool(np.all(prelim.beta_tilde[active] != 0) and np.all(prelim.gamma_tilde[truth.gamma_star != 0] != 0))
    return Metrics(float(d @ d), fp, tp, size, cov)


def lasso_baseline(dataset, grid=None, grid_size=20, opts=None):
    """Unit-weight Lasso on (X, y) ignoring outliers, lambda chosen by BIC with
    gamma = 0. The path is warm-started from the largest lambda down."""
    opts = opts or SolverOptions()
    X, y = dataset.X, dataset.y
    n, p = X.shape
    if not np.any(y):
        return np.zeros(p)
    if grid is None:
        grid = lambda_grid(X, y, count=grid_size)
    Xf = np.asfortranarray(X)
    colsq = np.einsum("ij,ij->j", Xf, Xf)
    b = np.zeros(p)
    r = y.copy()
    log_term = math.log(n) / n
    best, best_bic = b.copy(), r @ r / (2 * n)
    for lam in sorted((float(v) for v in grid), reverse=True):
        cd_kernel(Xf, r, b, colsq, n * lam / colsq, opts.tol, opts.max_iter, opts.active_set)
        r = y - Xf @ b
        bic = r @ r / (2 * n) + log_term * np.count_nonzero(b)
        if bic < best_bic:
            best, best_bic = b.copy(), bic
    return best


def oracle_baseline(dataset, truth, grid=None, grid_size=20, opts=None):
    """Lasso baseline after dropping the true outliers; coefficients are
    mapped back to the scale of the full design."""
    keep = truth.gamma_star == 0
    if not np.any(keep):
        raise ValueError("every observation is an outlier; nothing left to fit")
    if np.all(keep):
        return lasso_baseline(dataset, grid, grid_size, opts)
    X_sub, scales = normalize_columns(dataset.X[keep])
    sub = Dataset(y=dataset.y[keep], X=X_sub)
    return lasso_baseline(sub, grid, grid_size, opts) * scales


@dataclass
class MonteCarloConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    baselines: bool = True
    grid_size: int = 20


def replication_seed(master_seed, index):
    return np.random.SeedSequence([int(master_seed), int(index)])


def run_replication(scenario, index, rules, prelim_variants, config):
    """One replication: returns a list of ``(prelim, rule, Metrics)``."""
    dataset, truth = generate(scenario, replication_seed(scenario.seed, index))
    pcfg = config.pipeline
    out = []
    grid = pcfg.grid_lambda_theta
    if grid is None:
        grid = default_lambda_theta_grid(dataset, pcfg.grid_size)
    path = preliminary_path(dataset, grid, pcfg.solver_options())
    for variant in prelim_variants:
        cfg = PipelineConfig(**{**pcfg.__dict__, "prelim": variant})
        for rule in rules:
            res = full_pipeline(dataset, get_rule(rule), cfg, path=path)
            out.append((variant, get_rule(rule).kind, evaluate(res.fit.beta, res.prelim, truth)))
    if config.baselines:
        out.append(("-", "lasso", evaluate(lasso_baseline(dataset, grid_size=config.grid_size), None, truth)))
        if scenario.g_star < scenario.n:
            out.append(("-", "oracle", evaluate(oracle_baseline(dataset, truth, grid_size=config.grid_size),
                                                None, truth)))
    return out


def prelim_replication(scenario, index, config):
    """Preliminary-only replication used by the coverage/support-size sweep."""
    dataset, truth = generate(scenario, replication_seed(scenario.seed, index))
    pcfg = config.pipeline
    grid = pcfg.grid_lambda_theta
    if grid is None:
        grid = default_lambda_theta_grid(dataset, pcfg.grid_size)
    path = preliminary_path(dataset, grid, pcfg.solver_options())
    out = []
    for variant in ("pre", "thpre"):
        pre = select_preliminary(dataset, grid_tau_theta=pcfg.grid_tau_theta, use_threshold=variant == "thpre",
                                 path=path)
        out.append((variant, "-", evaluate(pre.beta_tilde, pre, truth)))
    return out


def _guarded(fn, *args):
    try:
        with warnings.catch_warnings():
            # non-converged path points are flagged on the fit objects
            warnings.simplefilter("ignore", ConvergenceWarning)
            return fn(*args), None
    except Exception as exc:  # recorded per replication, never fatal to the run
        return None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"


@dataclass
class SummaryRow:
    prelim: str
    outlier_pct: float
    rule: str
    sq_l2_error: float
    fp: float
    tp: float
    support_size: float
    coverage: float
    count: int
    magnitude: float = None


@dataclass
class Summary:
    rows: list
    failures: int
    errors: list

    def lookup(self, prelim, rule, outlier_pct=None):
        for row in self.rows:
            if row.prelim == prelim and row.rule == rule and (outlier_pct is None or row.outlier_pct == outlier_pct):
                return row
        raise KeyError((prelim, rule, outlier_pct))


def _mean(values):
    return float(np.mean(values)) if values else float("nan")


def summarize(scenario, per_rep):
    """Average metrics over successful replications, keyed by (prelim, rule) in
    order of first appearance."""
    groups = {}
    for rep in per_rep:
        for prelim, rule, m in rep:
            groups.setdefault((prelim, rule), []).append(m)
    rows = []
    for (prelim, rule), ms in groups.items():
        sizes = [m.support_size_prelim for m in ms if m.support_size_prelim is not None]
        covs = [float(m.coverage) for m in ms if m.coverage is not None]
        rows.append(SummaryRow(
            prelim=prelim,
            outlier_pct=scenario.outlier_pct,
            rule=rule,
            sq_l2_error=_mean([m.sq_l2_error for m in ms]),
            fp=_mean([m.fp for m in ms]),
            tp=_mean([m.tp for m in ms]),
            support_size=_mean(sizes) if sizes else None,
            coverage=_mean(covs) if covs else None,
            count=len(ms),
            magnitude=scenario.outlier_magnitude,
        ))
    return rows


def _map(fn, arg_tuples, jobs):
    if jobs <= 1:
        return [_guarded(fn, *a) for a in arg_tuples]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_guarded, fn, *a) for a in arg_tuples]
        return [f.result() for f in futures]


def run_monte_carlo(scenario, replications, rules=("soft", "hard", "scad", "garrote"),
                    prelim_variants=("pre", "thpre"), config=None, jobs=1):
    """Mean metrics over `replications` independent draws of `scenario`.

    Failed replications are counted in ``Summary.failures`` and left out of
    every mean.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    config = config or MonteCarloConfig()
    results = _map(run_replication, [(scenario, r, tuple(rules), tuple(prelim_variants), config)
                                     for r in range(replications)], jobs)
    ok = [res for res, err in results if err is None]
    errors = [err for res, err in results if err is not None]
    return Summary(rows=summarize(scenario, ok), failures=len(errors), errors=errors)


def run_prelim_sweep(scenario, replications, config=None, jobs=1):
    if replications < 1:
        raise ValueError("replications must be >= 1")
    config = config or MonteCarloConfig()
    results = _map(prelim_replication, [(scenario, r, config) for r in range(replications)], jobs)
    ok = [res for res, err in results if err is None]
    errors = [err for res, err in results if err is not None]
    return Summary(rows=summarize(scenario, ok), failures=len(errors), errors=errors)


def _fmt(value, digits):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.{digits}f}"


def rows_to_csv(rows, columns=CSV_COLUMNS):
    """Render summary rows as CSV text with fixed-precision numbers."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    fmt = {"outlier_pct": 0, "sq_l2_error": 4, "fp": 2, "tp": 2, "support_size": 2, "coverage": 3,
           "magnitude": 0}
    for row in rows:
        out = []
        for col in columns:
            v = getattr(row, col)
            out.append(_fmt(v, fmt[col]) if col in fmt else v)
        writer.writerow(out)
    return buf.getvalue()


TABLE_RULES = ("soft", "hard", "scad", "garrote")
TABLE_PCTS = (5, 10, 20, 30)
FIGURE1_PCTS = (1, 5, 10, 15, 20, 25, 30, 35)
FIGURE2_MAGNITUDES = (2, 4, 6, 8, 10, 12, 14)


def table_design(which, full_scale=False):
    """``(n, p, s_star)`` for the two outlier-percentage tables.

    Table 1 is (200, 200, 10) at any scale. Table 2 is (200, 400, 20); its
    desk-scale stand-in halves n, p and s_star.
    """
    if which == "table1":
        return 200, 200, 10
    if which == "table2":
        return (200, 400, 20) if full_scale else (100, 200, 10)
    raise ValueError(which)


def reproduce_table(which, reps, seed, full_scale=False, pcts=TABLE_PCTS, rules=TABLE_RULES, config=None, jobs=1):
    n, p, s = table_design(which, full_scale)
    rows, failures = [], 0
    for pct in pcts:
        sc = Scenario.from_pct(n, p, s, pct, seed=seed)
        summary = run_monte_carlo(sc, reps, rules, ("pre", "thpre"), config, jobs)
        rows.extend(summary.rows)
        failures += summary.failures
    return rows, failures


def reproduce_figure1(reps, seed, pcts=FIGURE1_PCTS, config=None, jobs=1):
    rows, failures = [], 0
    for pct in pcts:
        summary = run_prelim_sweep(Scenario.from_pct(200, 200, 10, pct, seed=seed), reps, config, jobs)
        rows.extend(summary.rows)
        failures += summary.failures
    return rows, failures


def reproduce_figure2(reps, seed, full_scale=False, magnitudes=FIGURE2_MAGNITUDES, rules=("soft", "hard"),
                      config=None, jobs=1):
    n, p, s, g = (200, 400, 20, 20) if full_scale else (100, 200, 10, 10)
    config = config or MonteCarloConfig(baselines=False)
    rows, failures = [], 0
    for mag in magnitudes:
        sc = Scenario(n, p, s, g, outlier_magnitude=float(mag), seed=seed)
        summary = run_monte_carlo(sc, reps, rules, ("pre",), config, jobs)
        rows.extend(summary.rows)
        failures += summary.failures
    return rows, failures
