import math

import numpy as np
import pytest

from oracles import restricted_min_rayleigh
from robsparse.core import GuardError, normalize_columns
from robsparse.diagnostics import (
    bound_35,
    contraction_factor,
    eigen_report,
    jacobi_eigenvalues,
    restricted_max_eigenvalue,
    restricted_min_eigenvalue,
)


def test_jacobi_matches_lapack(rng):
    for k in (1, 2, 3, 5, 8):
        A = rng.standard_normal((k, k))
        A = A + A.T
        np.testing.assert_allclose(np.sort(jacobi_eigenvalues(A)), np.linalg.eigvalsh(A), atol=1e-11)


def test_orthonormal_design():
    X = 2.0 * np.eye(4)  # columns of norm sqrt(4)
    assert restricted_min_eigenvalue(X, 2) == pytest.approx(1.0, abs=1e-14)
    # a single row of sqrt(n) e_j gives (n / n) = 1 on every block
    assert restricted_max_eigenvalue(X, 2, 1) == pytest.approx(1.0, abs=1e-14)


def test_duplicate_columns_give_zero(rng):
    X = rng.standard_normal((8, 4))
    X[:, 3] = X[:, 1]
    X, _ = normalize_columns(X)
    assert restricted_min_eigenvalue(X, 2) == pytest.approx(0.0, abs=1e-12)
    assert restricted_min_eigenvalue(X, 1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("u", [1, 2, 3])
def test_matches_rayleigh_oracle(u):
    rng = np.random.default_rng(31 + u)
    X, _ = normalize_columns(rng.standard_normal((8, 5)))
    assert restricted_min_eigenvalue(X, u) == pytest.approx(restricted_min_rayleigh(X, u), abs=1e-6)


def test_monotone_in_support_size(rng):
    X, _ = normalize_columns(rng.standard_normal((10, 6)))
    mins = [restricted_min_eigenvalue(X, u) for u in range(1, 7)]
    maxs = [restricted_max_eigenvalue(X, u, 4) for u in range(1, 7)]
    assert np.all(np.diff(mins) <= 1e-12)
    assert np.all(np.diff(maxs) >= -1e-12)
    rows = [restricted_max_eigenvalue(X, 3, g) for g in range(1, 11)]
    assert np.all(np.diff(rows) >= -1e-12)


def test_max_eigenvalue_below_bound(rng):
    for _ in range(5):
        X, _ = normalize_columns(rng.standard_normal((9, 5)))
        for u, g in [(1, 1), (2, 3), (3, 4)]:
            assert restricted_max_eigenvalue(X, u, g) <= bound_35(X, u, g) + 1e-12


def test_full_supports_equal_plain_eigenvalues(rng):
    X, _ = normalize_columns(rng.standard_normal((7, 4)))
    ev = np.linalg.eigvalsh(X.T @ X / 7)
    assert restricted_min_eigenvalue(X, 4) == pytest.approx(ev[0], abs=1e-12)
    assert restricted_max_eigenvalue(X, 4, 7) == pytest.approx(ev[-1], abs=1e-12)
    assert restricted_min_eigenvalue(X, 9) == pytest.approx(ev[0], abs=1e-12)


def test_guards(rng):
    with pytest.raises(GuardError, match="p = 13"):
        restricted_min_eigenvalue(rng.standard_normal((5, 13)), 2)
    with pytest.raises(GuardError, match="n = 15"):
        restricted_max_eigenvalue(rng.standard_normal((15, 3)), 1, 2)
    with pytest.raises(GuardError, match="MAX_BLOCKS"):
        restricted_max_eigenvalue(rng.standard_normal((14, 12)), 6, 7)
    with pytest.raises(ValueError):
        restricted_min_eigenvalue(rng.standard_normal((5, 3)), 0)


def test_contraction_examples():
    X = 2.0 * np.eye(4)
    assert contraction_factor(X, 2, 1, 1.0) == pytest.approx(2.0)
    assert contraction_factor(X, 2, 1, 4.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        contraction_factor(X, 2, 1, 0.0)


def test_report(rng):
    X, _ = normalize_columns(rng.standard_normal((6, 4)))
    rep = eigen_report(X, 2, 3)
    assert rep.kappa == rep.delta_min
    assert rep.rho == pytest.approx(2 * rep.delta_max / rep.delta_min)
    assert rep.supports_examined == math.comb(4, 2) + math.comb(4, 2) * math.comb(6, 3)
    assert rep.rho_ge_one == (rep.rho >= 1)
    rep2 = eigen_report(X, 2, 1, kappa=100.0)
    assert rep2.rho < 1 and not rep2.rho_ge_one
    assert set(rep.as_dict()) == {"delta_min", "delta_max", "rho", "bound_35", "supports_examined", "kappa",
                                  "rho_ge_one"}


def test_two_by_two_identity_single_row():
    X = math.sqrt(2) * np.eye(2)
    assert restricted_max_eigenvalue(X, 1, 1) == pytest.approx(1.0, abs=1e-14)
    assert contraction_factor(X, 1, 1, 1.0) == pytest.approx(2.0 * restricted_max_eigenvalue(X, 1, 1))


def test_full_row_set_is_unrestricted(rng):
    X, _ = normalize_columns(rng.standard_normal((6, 4)))
    gram = X.T @ X / 6
    expected = max(np.linalg.eigvalsh(gram[np.ix_(T, T)])[-1] for T in [(i, j) for i in range(4)
                                                                          for j in range(i + 1, 4)])
    assert restricted_max_eigenvalue(X, 2, 6) == pytest.approx(expected, abs=1e-12)


def test_rho_boundary_is_flagged(rng):
    X, _ = normalize_columns(rng.standard_normal((6, 4)))
    dmax = restricted_max_eigenvalue(X, 2, 3)
    rep = eigen_report(X, 2, 3, kappa=2 * dmax)
    assert rep.rho == pytest.approx(1.0) and rep.rho_ge_one
    assert rep.bound_35 >= rep.delta_max
