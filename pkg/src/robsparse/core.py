"""Data model shared by every solver: datasets, weights, fit results and the
objective of the outlier-augmented regression problem.

Conventions
-----------
* Model: ``y = X beta + sqrt(n) gamma + eps``; a nonzero ``gamma_i`` marks
  observation ``i`` as an outlier.
* Every column of ``X`` has Euclidean norm ``sqrt(n)``. :func:`normalize_columns`
  enforces this and keeps the factors needed to map coefficients back to the
  original units.
* There is no intercept. Center ``y`` and ``X`` yourself (or append a column)
  if the data need one.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class RobsparseError(Exception):
    """Base class for errors raised by this package."""


class DataError(RobsparseError, ValueError):
    """Malformed input data (bad CSV, zero column, NaN, ...)."""


class DegenerateFitError(RobsparseError):
    """A fit cannot proceed, e.g. the preliminary support is empty."""


class GuardError(RobsparseError, ValueError):
    """A combinatorial size guard refused the request."""


class PipelineError(RobsparseError):
    """Failure inside the two-stage pipeline, tagged with the failing stage."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


NORM_TOL = 1e-8


def normalize_columns(X_raw):
    """Rescale every column of `X_raw` to Euclidean norm ``sqrt(n)``.

    Returns ``(X, column_scales)`` with ``X[:, j] = X_raw[:, j] * column_scales[j]``.
    A coefficient fitted on ``X`` is expressed in the original units by
    multiplying it by the matching scale.
    """
    X_raw = np.asarray(X_raw, dtype=float)
    if X_raw.ndim != 2:
        raise DataError(f"expected a 2-d covariate matrix, got shape {X_raw.shape}")
    if not np.all(np.isfinite(X_raw)):
        raise DataError("covariate matrix contains NaN or Inf")
    n = X_raw.shape[0]
    norms = np.linalg.norm(X_raw, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(f"zero column at index {int(zero[0])}: cannot normalize")
    scales = math.sqrt(n) / norms
    return X_raw * scales, scales


@dataclass(frozen=True)
class Dataset:
    """Response `y` (length n) and column-normalized covariates `X` (n x p)."""

    y: np.ndarray
    X: np.ndarray
    column_scales: np.ndarray = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"shape mismatch: y has {y.shape[0]} rows, X has shape {X.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset needs n >= 1 and p >= 1")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("dataset contains NaN or Inf")
        n = X.shape[0]
        norms = np.linalg.norm(X, axis=0)
        bad = np.flatnonzero(np.abs(norms - math.sqrt(n)) > NORM_TOL * math.sqrt(n))
        if bad.size:
            raise DataError(
                f"column {int(bad[0])} has norm {norms[bad[0]]:.6g}, expected sqrt(n)={math.sqrt(n):.6g}; "
                "use Dataset.from_raw or normalize_columns"
            )
        scales = np.ones(X.shape[1]) if self.column_scales is None else np.asarray(self.column_scales, float)
        if scales.shape != (X.shape[1],) or np.any(scales <= 0):
            raise DataError("column_scales must be a positive p-vector")
        y.flags.writeable = False
        X.flags.writeable = False
        scales.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_scales", scales)

    @classmethod
    def from_raw(cls, y, X_raw):
        X, scales = normalize_columns(X_raw)
        return cls(y=y, X=X, column_scales=scales)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def to_original_units(self, beta):
        return np.asarray(beta, dtype=float) * self.column_scales


@dataclass(frozen=True)
class TuningParams:
    lambda_beta: float = 0.0
    lambda_gamma: float = 0.0
    lambda_theta: float = 0.0
    tau_theta: float = 0.0

    def __post_init__(self):
        for name in ("lambda_beta", "lambda_gamma", "lambda_theta", "tau_theta"):
            value = getattr(self, name)
            if not value >= 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")


@dataclass(frozen=True)
class Weights:
    """Adaptive l1 weights living on the preliminary supports.

    ``w_beta[k]`` is the weight of coefficient ``support_beta[k]``; likewise for
    gamma. Coordinates outside the supports carry no weight and are held at
    zero by the solvers.
    """

    support_beta: np.ndarray
    w_beta: np.ndarray
    support_gamma: np.ndarray
    w_gamma: np.ndarray
    R_w: float = 100.0

    def __post_init__(self):
        sb = np.asarray(self.support_beta, dtype=np.intp).reshape(-1)
        sg = np.asarray(self.support_gamma, dtype=np.intp).reshape(-1)
        wb = np.asarray(self.w_beta, dtype=float).reshape(-1)
        wg = np.asarray(self.w_gamma, dtype=float).reshape(-1)
        if sb.shape != wb.shape or sg.shape != wg.shape:
            raise ValueError("each support must have one weight per index")
        if np.any(wb < 0) or np.any(wg < 0) or not (np.all(np.isfinite(wb)) and np.all(np.isfinite(wg))):
            raise ValueError("weights must be finite and nonnegative")
        if not self.R_w > 0:
            raise ValueError("R_w must be positive")
        for arr in (sb, sg, wb, wg):
            arr.flags.writeable = False
        object.__setattr__(self, "support_beta", sb)
        object.__setattr__(self, "support_gamma", sg)
        object.__setattr__(self, "w_beta", wb)
        object.__setattr__(self, "w_gamma", wg)

    @classmethod
    def unit(cls, n, p, R_w=100.0):
        """All coordinates free with unit weight (plain Lasso-type penalties)."""
        return cls(np.arange(p), np.ones(p), np.arange(n), np.ones(n), R_w)

    def full_beta(self, p):
        """Length-p weights, ``inf`` outside the support."""
        out = np.full(p, np.inf)
        out[self.support_beta] = self.w_beta
        return out

    def full_gamma(self, n):
        out = np.full(n, np.inf)
        out[self.support_gamma] = self.w_gamma
        return out


@dataclass
class FitResult:
    beta: np.ndarray
    gamma: np.ndarray
    objective_trace: list
    iterations: int
    tuning: TuningParams
    rule_name: str
    converged: bool = True
    bic: float = None
    beta_path: list = field(default=None, repr=False)

    @property
    def support_beta(self):
        return np.flatnonzero(self.beta)

    @property
    def support_gamma(self):
        return np.flatnonzero(self.gamma)


def residuals(dataset, beta, gamma=None):
    r = dataset.y - dataset.X @ beta
    if gamma is not None:
        r = r - math.sqrt(dataset.n) * np.asarray(gamma, dtype=float)
    return r


def objective(dataset, beta, gamma, rule, weights, tuning):
    """Value of the penalized least-squares objective at ``(beta, gamma)``.

    The gamma penalty of observation ``i`` is ``penalty(sqrt(n) gamma_i;
    lambda_gamma w_gamma_i) / n``. With this scaling the closed-form update
    ``gamma_i = theta(r_i; lambda_gamma w_gamma_i) / sqrt(n)`` is the exact
    minimizer in gamma, and for the soft rule the term reduces to
    ``lambda_gamma w_gamma_i |gamma_i|`` when n = 1.
    """
    n, p = dataset.n, dataset.p
    beta = np.asarray(beta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    wb = weights.full_beta(p)
    wg = weights.full_gamma(n)
    off_b = np.flatnonzero((beta != 0) & np.isinf(wb))
    off_g = np.flatnonzero((gamma != 0) & np.isinf(wg))
    if off_b.size or off_g.size:
        raise ValueError(
            "nonzero coefficient outside the weighted support "
            f"(beta indices {off_b.tolist()}, gamma indices {off_g.tolist()})"
        )
    r = residuals(dataset, beta, gamma)
    value = r @ r / (2 * n)
    sb = weights.support_beta
    value += tuning.lambda_beta * np.sum(weights.w_beta * np.abs(beta[sb]))
    sg = weights.support_gamma
    if sg.size:
        thresholds = tuning.lambda_gamma * weights.w_gamma
        value += np.sum(rule.penalty(math.sqrt(n) * gamma[sg], thresholds)) / n
    return float(value)


def _parse_float(text, row, col_name):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} at row {row}, column {col_name!r}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {text!r} at row {row}, column {col_name!r}")
    return value


def read_csv_matrix(path, has_header=True):
    """Read a rectangular numeric CSV. Returns ``(header, values)``.

    Rows are numbered from 1 among data rows (the header is not counted).
    """
    with open(Path(path), newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    if has_header:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    else:
        header = [str(j) for j in range(len(rows[0]))]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header)
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataError(f"ragged row {i}: expected {width} fields, found {len(row)}")
        for j, cell in enumerate(row):
            values[i - 1, j] = _parse_float(cell.strip(), i, header[j])
    return header, values


def resolve_column(header, response_column):
    if isinstance(response_column, str) and response_column in header:
        return header.index(response_column)
    try:
        idx = int(response_column)
    except (TypeError, ValueError):
        raise DataError(
            f"response column {response_column!r} not found; available columns: {', '.join(header)}"
        ) from None
    if not 0 <= idx < len(header):
        raise DataError(
            f"response column index {idx} out of range; available columns: {', '.join(header)}"
        )
    return idx


def load_csv(path, response_column=0, has_header=True):
    """Load a dataset from CSV; the covariates are normalized, the response is not."""
    header, values = read_csv_matrix(path, has_header)
    k = resolve_column(header, response_column)
    if values.shape[1] < 2:
        raise DataError("need at least one covariate column besides the response")
    y = values[:, k]
    X_raw = np.delete(values, k, axis=1)
    names = [h for j, h in enumerate(header) if j != k]
    zero = np.flatnonzero(~np.any(X_raw != 0, axis=0))
    if zero.size:
        j = int(zero[0])
        raise DataError(f"zero column {names[j]!r} (covariate index {j}): cannot normalize")
    X, scales = normalize_columns(X_raw)
    return Dataset(y=y, X=X, column_scales=scales)
