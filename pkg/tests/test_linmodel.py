"""Regression building blocks against hand-computed solutions."""

import numpy as np
import pytest

from multitreat.errors import IdentificationError, InputError
from multitreat.linmodel import covariance, ols, tsls


def test_ols_matches_hand_solved_normal_equations():
    # X'X = [[3,3],[3,6]], X'y = [[9],[15]]; solved by hand: coef = (1, 2)
    x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 2.0]])
    y = np.array([1.0, 2.0, 3.0, 5.0])
    fit = ols(y, x)
    np.testing.assert_allclose(fit.coef_vector(), [1.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(
        fit.xtx_inverse, [[2 / 3, -1 / 3], [-1 / 3, 1 / 3]], atol=1e-12
    )
    np.testing.assert_allclose(
        fit.residuals[:, 0], y - x @ [1.0, 2.0], atol=1e-12
    )


def test_ols_centered_single_regressor():
    # after centering, slope = sum(xc*yc) / sum(xc^2) = 1/2
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([0.0, 1.0, 1.0])
    xc = x - x.mean()
    yc = y - y.mean()
    fit = ols(yc, xc)
    np.testing.assert_allclose(fit.coef_vector(), [0.5], atol=1e-12)


def test_ols_multiple_responses_columnwise():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3))
    ymat = rng.standard_normal((50, 2))
    fit = ols(ymat, x)
    for j in range(2):
        np.testing.assert_allclose(
            fit.coef[:, j], ols(ymat[:, j], x).coef_vector(), atol=1e-12
        )


def test_ols_rejects_rank_deficiency():
    x = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]])
    with pytest.raises(IdentificationError):
        ols(np.ones(4), x)


def test_ols_rejects_wide_design():
    with pytest.raises(InputError):
        ols(np.ones(2), np.eye(2, 3))


def test_tsls_exactly_identified_equals_iv_formula():
    # with as many instruments as endogenous regressors, two-stage least
    # squares reduces to (Z'X)^{-1} Z'y
    rng = np.random.default_rng(42)
    n = 200
    z = rng.standard_normal((n, 2))
    x = z @ np.array([[1.0, 0.3], [0.2, 1.0]]) + rng.standard_normal((n, 2))
    y = x @ np.array([0.5, -1.0]) + rng.standard_normal(n)
    oracle = np.linalg.solve(z.T @ x, z.T @ y)
    np.testing.assert_allclose(tsls(y, x, z), oracle, atol=1e-10)


def test_tsls_with_exogenous_matches_augmented_iv_formula():
    # stacking the exogenous block into both the instrument and regressor
    # sets gives the same exactly identified formula
    rng = np.random.default_rng(7)
    n = 300
    z = rng.standard_normal((n, 1))
    c = rng.standard_normal((n, 1))
    x = 1.5 * z + 0.5 * c + rng.standard_normal((n, 1))
    y = 2.0 * x[:, 0] - 1.0 * c[:, 0] + rng.standard_normal(n)
    coef = tsls(y, x, z, exogenous=c)
    full_z = np.hstack([z, c])
    full_x = np.hstack([x, c])
    oracle = np.linalg.solve(full_z.T @ full_x, full_z.T @ y)
    np.testing.assert_allclose(coef, oracle, atol=1e-10)


def test_tsls_underidentified_raises():
    rng = np.random.default_rng(1)
    with pytest.raises(IdentificationError):
        tsls(
            rng.standard_normal(50),
            rng.standard_normal((50, 2)),
            rng.standard_normal((50, 1)),
        )


def test_covariance_hand_value():
    m = np.array([[1.0, 0.0], [3.0, 0.0]])
    cov = covariance(m)
    np.testing.assert_allclose(cov.matrix, [[2.0, 0.0], [0.0, 0.0]], atol=1e-14)
    assert cov.n == 2


def test_covariance_is_symmetric():
    rng = np.random.default_rng(3)
    cov = covariance(rng.standard_normal((40, 5))).matrix
    np.testing.assert_array_equal(cov, cov.T)


def test_covariance_needs_two_rows():
    with pytest.raises(InputError):
        covariance(np.ones((1, 3)))
