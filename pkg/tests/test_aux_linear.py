"""Auxiliary-variables estimator: population exactness and invariances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multitreat.aux_linear import combine_aux, estimate_aux, estimate_aux_subset
from multitreat.data import Dataset
from multitreat.errors import IdentificationError, InputError
from multitreat.sim import aux_preset, gen_aux_setting


def population_quantities(cfg):
    """Exact population values of every ingredient of the estimator.

    With x = alpha u + eta z + e and y = beta'x + delta'u + e_y, the
    conditional mean of u given (x, z) is gamma'(x - eta z) with
    gamma = (alpha alpha' + I)^{-1} alpha, so the outcome regression has
    treatment coefficients beta + gamma delta and instrument coefficients
    -eta' gamma delta.
    """
    sigma = cfg.alpha @ cfg.alpha.T + cfg.noise_x**2 * np.eye(cfg.p)
    gamma = np.linalg.solve(sigma, cfg.alpha)
    xi_x = cfg.beta + gamma @ cfg.delta_y
    xi_z = -cfg.eta.T @ gamma @ cfg.delta_y
    return gamma, xi_x, xi_z


def test_combine_aux_exact_at_population_moments():
    cfg = aux_preset()
    gamma, xi_x, xi_z = population_quantities(cfg)
    beta, delta = combine_aux(xi_x, xi_z, gamma, cfg.eta)
    np.testing.assert_allclose(beta, cfg.beta, atol=1e-10)
    np.testing.assert_allclose(delta, cfg.delta_y, atol=1e-10)


def test_combine_aux_subset_of_instruments():
    # using only the last two instrument columns still identifies q=2
    cfg = aux_preset()
    gamma, xi_x, xi_z = population_quantities(cfg)
    iv = [4, 5]
    beta, delta = combine_aux(xi_x, xi_z[iv], gamma, cfg.eta[:, iv])
    np.testing.assert_allclose(beta, cfg.beta, atol=1e-10)
    np.testing.assert_allclose(delta, cfg.delta_y, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_combine_aux_rotation_invariance(seed):
    # gamma is identified only up to an orthogonal rotation of the factor
    # space; the corrected coefficients must not depend on it
    cfg = aux_preset()
    gamma, xi_x, xi_z = population_quantities(cfg)
    rng = np.random.default_rng(seed)
    qmat, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    beta, _ = combine_aux(xi_x, xi_z, gamma, cfg.eta)
    beta_rot, _ = combine_aux(xi_x, xi_z, gamma @ qmat, cfg.eta)
    np.testing.assert_allclose(beta_rot, beta, atol=1e-8)


def test_combine_aux_rank_failure():
    cfg = aux_preset()
    gamma, xi_x, xi_z = population_quantities(cfg)
    with pytest.raises(IdentificationError):
        combine_aux(xi_x, xi_z[:1], gamma, np.zeros((6, 1)))


def test_estimate_aux_recovers_beta():
    cfg = aux_preset()
    d = gen_aux_setting(cfg, 20_000, np.random.default_rng(21))
    est = estimate_aux(d, q=2)
    np.testing.assert_allclose(est.beta, cfg.beta, atol=0.05)
    # delta is identified only up to the factor rotation; its norm is not
    np.testing.assert_allclose(np.linalg.norm(est.delta), np.sqrt(2.0), atol=0.1)


def test_estimate_aux_subset_recovers_beta():
    cfg = aux_preset()
    d = gen_aux_setting(cfg, 20_000, np.random.default_rng(22))
    est = estimate_aux_subset(d, q=2, iv_cols=(4, 5))
    np.testing.assert_allclose(est.beta, cfg.beta, atol=0.05)


def test_estimate_aux_under_specified_q_is_biased():
    # one factor cannot absorb two confounders: some coefficient stays off
    cfg = aux_preset()
    d = gen_aux_setting(cfg, 20_000, np.random.default_rng(23))
    est = estimate_aux_subset(d, q=1, iv_cols=(5,))
    assert np.abs(est.beta - cfg.beta).max() > 0.05


def test_estimate_aux_outcome_coefficients_match_ols():
    cfg = aux_preset()
    d = gen_aux_setting(cfg, 5_000, np.random.default_rng(24))
    est = estimate_aux(d, q=2)
    design = np.hstack([d.x - d.x.mean(axis=0), d.z - d.z.mean(axis=0)])
    ref = np.linalg.lstsq(design, d.y - d.y.mean(), rcond=None)[0]
    np.testing.assert_allclose(np.r_[est.xi_x, est.xi_z], ref, atol=1e-8)


def test_estimate_aux_requires_instruments():
    d = Dataset(y=np.zeros(10), x=np.zeros((10, 2)) + np.eye(10, 2))
    with pytest.raises(InputError):
        estimate_aux(d, q=1)


def test_estimate_aux_subset_validates_columns():
    cfg = aux_preset()
    d = gen_aux_setting(cfg, 500, np.random.default_rng(25))
    with pytest.raises(InputError):
        estimate_aux_subset(d, q=1, iv_cols=(11,))
    with pytest.raises(IdentificationError):
        estimate_aux_subset(d, q=2, iv_cols=(5,))
