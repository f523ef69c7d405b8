"""Scalar thresholding rules used for the outlier parameters.

Each rule supplies

* ``theta(z, lam)``   -- argmin_x (z - x)^2 / 2 + penalty(x, lam)
* ``psi(z, lam)``     -- z - theta(z, lam), the influence function of the
  implied M-estimator
* ``penalty(t, lam)`` -- the penalty whose scalar proximal map is ``theta``
  (``lam`` is folded in, e.g. ``lam * |t|`` for soft)
* ``robust_loss(z, lam)`` -- Psi(z) = int_0^z psi(t) dt

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import integrate

RULE_KINDS = ("soft", "hard", "scad", "garrote", "mcp")
DEFAULT_SHAPE = {"scad": 3.7, "mcp": 3.0}


@dataclass(frozen=True)
class ThresholdingRule:
    kind: str
    a: float = None

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule {self.kind!r}; valid names: {', '.join(RULE_KINDS)}")
        a = self.a
        if a is None:
            a = DEFAULT_SHAPE.get(self.kind)
        elif self.kind not in DEFAULT_SHAPE:
            raise ValueError(f"rule {self.kind!r} takes no shape parameter")
        if self.kind == "scad" and not a > 2:
            raise ValueError(f"scad requires a > 2, got {a}")
        if self.kind == "mcp" and not a > 1:
            raise ValueError(f"mcp requires a > 1, got {a}")
        object.__setattr__(self, "a", None if a is None else float(a))

    @property
    def name(self):
        if self.a is None:
            return self.kind
        return f"{self.kind}(a={self.a:g})"

    @property
    def redescending(self):
        return self.kind != "soft"

    def theta(self, z, lam):
        z = np.asarray(z, dtype=float)
        lam = np.asarray(lam, dtype=float)
        az = np.abs(z)
        sz = np.sign(z)
        if self.kind == "soft":
            out = sz * np.maximum(az - lam, 0.0)
        elif self.kind == "hard":
            out = np.where(az > lam, z, 0.0)
        elif self.kind == "scad":
            a = self.a
            out = np.where(
                az <= 2 * lam,
                sz * np.maximum(az - lam, 0.0),
                np.where(az <= a * lam, ((a - 1) * z - a * lam * sz) / (a - 2), z),
            )
        elif self.kind == "mcp":
            a = self.a
            out = np.where(az <= a * lam, sz * np.maximum(az - lam, 0.0) / (1 - 1 / a), z)
        else:  # garrote
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                out = np.where(az > lam, z - lam * lam / np.where(az > 0, z, 1.0), 0.0)
        return out[()] if out.ndim == 0 else out

    def psi(self, z, lam):
        """``z - theta(z; lam)``, in closed form where subtraction would cancel."""
        z = np.asarray(z, dtype=float)
        lam = np.asarray(lam, dtype=float)
        if self.kind == "soft":
            out = np.clip(z, -lam, lam)
        elif self.kind == "hard":
            out = np.where(np.abs(z) > lam, 0.0, z)
        elif self.kind == "garrote":
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(np.abs(z) > lam, lam * lam / np.where(z != 0, z, 1.0), z)
        else:
            out = z - self.theta(z, lam)
        return out[()] if np.ndim(out) == 0 else out

    def penalty(self, t, lam):
        t = np.asarray(t, dtype=float)
        lam = np.asarray(lam, dtype=float)
        at = np.abs(t)
        if self.kind == "soft":
            out = lam * at
        elif self.kind == "hard":
            out = np.where(t != 0, lam * lam / 2, 0.0)
        elif self.kind == "scad":
            a = self.a
            out = np.where(
                at <= lam,
                lam * at,
                np.where(
                    at <= a * lam,
                    (2 * a * lam * at - t * t - lam * lam) / (2 * (a - 1)),
                    (a + 1) * lam * lam / 2,
                ),
            )
        elif self.kind == "mcp":
            a = self.a
            out = np.where(at <= a * lam, lam * at - t * t / (2 * a), a * lam * lam / 2)
        else:  # garrote: integral of (sqrt(t^2 + 4 lam^2) - t) / 2
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                out = (
                    at * np.sqrt(t * t + 4 * lam * lam) / 4
                    + lam * lam * np.arcsinh(at / (2 * lam))
                    - t * t / 4
                )
            out = np.where(lam > 0, out, 0.0)
        out = out + np.zeros_like(t)
        return out[()] if out.ndim == 0 else out

    def kinks(self, lam):
        """Points where psi is not smooth, for quadrature."""
        if self.kind == "scad":
            return (lam, 2 * lam, self.a * lam)
        if self.kind == "mcp":
            return (lam, self.a * lam)
        return (lam,)

    def robust_loss(self, z, lam):
        """Psi(z; lam) by adaptive quadrature of psi over [0, z]."""
        z = float(z)
        lam = float(lam)
        if z == 0.0:
            return 0.0
        hi = abs(z)
        sign = 1.0 if z > 0 else -1.0
        pts = sorted({k for k in self.kinks(lam) if 0 < k < hi})
        value, _ = integrate.quad(
            lambda t: sign * float(self.psi(sign * t, lam)),
            0.0,
            hi,
            points=pts or None,
            epsabs=1e-13,
            epsrel=1e-12,
            limit=200,
        )
        return value


_RULE_RE = re.compile(r"^\s*([a-z]+)\s*(?:[:(]\s*a\s*=\s*([0-9.eE+-]+)\s*\)?)?\s*$")


def get_rule(name, a=None):
    """Build a rule from a name such as ``"hard"``, ``"scad"``, ``"scad:a=3.7"``
    or ``"mcp(a=2.5)"``. An explicit `a` overrides the one in the string."""
    if isinstance(name, ThresholdingRule):
        return name if a is None else ThresholdingRule(name.kind, a)
    m = _RULE_RE.match(str(name).lower())
    if not m or m.group(1) not in RULE_KINDS:
        raise ValueError(f"unknown rule {name!r}; valid names: {', '.join(RULE_KINDS)}")
    if a is None and m.group(2) is not None:
        a = float(m.group(2))
    return ThresholdingRule(m.group(1), a)


def theta(rule, z, lam):
    return rule.theta(z, lam)


def psi(rule, z, lam):
    return rule.psi(z, lam)


def penalty(rule, t, lam):
    return rule.penalty(t, lam)


def robust_loss(rule, z, lam):
    return rule.robust_loss(z, lam)


@dataclass
class Condition2Report:
    rule: str
    samples: int
    zero_violations: int
    max_inner_abs: float
    max_bias_slack: float
    witness: tuple = None
    tol: float = 1e-12

    @property
    def passed(self):
        return self.zero_violations == 0 and self.max_bias_slack <= self.tol


def check_condition2(rule, sample_count=10_000, seed=0, tol=1e-12):
    """Certify ``theta(x; lam) = 0`` for ``|x| <= lam`` and ``|theta(x; lam) - x| <= lam``.

    Half the samples come from a deterministic (z, lam) grid that includes the
    boundary points ``z = +-lam``, the rest are uniform random draws. `rule`
    may be any object with a vectorized ``theta(z, lam)`` method.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    n_grid = sample_count // 2
    side = max(1, int(math.isqrt(n_grid)))
    lam_g = np.linspace(0.0, 5.0, side)
    ratio = np.linspace(-4.0, 4.0, side)
    L, R = np.meshgrid(lam_g, ratio, indexing="ij")
    z_grid = (R * np.where(L > 0, L, 1.0)).ravel()
    lam_grid = L.ravel()
    # exact boundary points
    z_grid = np.concatenate([z_grid, lam_g, -lam_g])
    lam_grid = np.concatenate([lam_grid, lam_g, lam_g])
    rng = np.random.default_rng(seed)
    n_rand = max(sample_count - z_grid.size, 0)
    lam_r = rng.uniform(0.0, 10.0, n_rand)
    z_r = rng.uniform(-60.0, 60.0, n_rand)
    z = np.concatenate([z_grid, z_r])[: max(sample_count, 1)]
    lam = np.concatenate([lam_grid, lam_r])[: z.size]

    th = np.asarray(rule.theta(z, lam), dtype=float)
    inner = np.abs(z) <= lam
    inner_abs = np.abs(th[inner])
    zero_viol = int(np.count_nonzero(inner_abs != 0.0))
    slack = np.abs(th - z) - lam
    k = int(np.argmax(slack))
    witness = None
    if zero_viol:
        idx = np.flatnonzero(inner)[np.argmax(inner_abs)]
        witness = (float(z[idx]), float(lam[idx]))
    elif slack[k] > tol:
        witness = (float(z[k]), float(lam[k]))
    return Condition2Report(
        rule=getattr(rule, "name", type(rule).__name__),
        samples=int(z.size),
        zero_violations=zero_viol,
        max_inner_abs=float(inner_abs.max()) if inner_abs.size else 0.0,
        max_bias_slack=float(slack[k]),
        witness=witness,
        tol=tol,
    )
