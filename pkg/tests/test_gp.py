import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfloop.errors import IllConditioned, InvalidArgument
from mfloop.gp import (
    KernelParams,
    add_data,
    condition_on,
    fit_gp,
    gp_predict,
    log_marginal_likelihood,
    model_lml,
    predict,
    se_kernel,
)


def dense_posterior(params, X, y, Q, jitter):
    """Textbook GP posterior by explicit inversion, standardized units."""
    X, Q = np.atleast_2d(X), np.atleast_2d(Q)
    ls = np.asarray(params.lengthscales)
    def k(A, B):
        d2 = (((A[:, None, :] - B[None, :, :]) / ls) ** 2).sum(-1)
        return params.signal_var * np.exp(-0.5 * d2)
    Kinv = np.linalg.inv(k(X, X) + (params.noise_var + jitter) * np.eye(len(X)))
    Ks = k(Q, X)
    return Ks @ Kinv @ y, params.signal_var - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)


def test_single_point_interpolates():
    m = fit_gp([[0.5]], [2.0], noise_floor=0.0)
    mean, var = gp_predict(m, [0.5])
    assert mean == pytest.approx(2.0, abs=1e-12)
    assert 0.0 <= var <= 1e-8


def test_constant_targets_predict_constant():
    X = np.linspace(0, 1, 5)[:, None]
    m = fit_gp(X, np.full(5, 3.25))
    mean, _ = predict(m, np.linspace(-0.5, 1.5, 41)[:, None])
    assert np.max(np.abs(mean - 3.25)) < 1e-6


def test_three_point_fixed_params_oracle():
    X = np.array([[0.1], [0.45], [0.9]])
    y = np.array([1.0, -0.5, 2.0])
    p = KernelParams(1.3, (0.25,), 1e-6)
    m = condition_on(p, X, y, y_mean=0.0, y_std=1.0)
    om, ov = dense_posterior(p, X, y, [[0.3]], m.jitter)
    mean, var = predict(m, [[0.3]])
    assert abs(mean[0] - om[0]) < 1e-10
    assert abs(var[0] - ov[0]) < 1e-10


def test_two_point_closed_form():
    s, ell, x1, x2, xq = 0.7, 0.4, 0.2, 0.6, 0.35
    y = np.array([0.3, -1.1])
    m = condition_on(KernelParams(s, (ell,), 0.0), [[x1], [x2]], y, y_mean=0.0, y_std=1.0)
    a = s + m.jitter
    b = s * math.exp(-0.5 * ((x1 - x2) / ell) ** 2)
    k1 = s * math.exp(-0.5 * ((xq - x1) / ell) ** 2)
    k2 = s * math.exp(-0.5 * ((xq - x2) / ell) ** 2)
    det = a * a - b * b
    w1, w2 = (a * k1 - b * k2) / det, (a * k2 - b * k1) / det
    mean, var = gp_predict(m, [xq])
    assert mean == pytest.approx(w1 * y[0] + w2 * y[1], abs=1e-10)
    assert var == pytest.approx(s - (w1 * k1 + w2 * k2), abs=1e-10)


def test_prior_reversion_far_away():
    m = condition_on(KernelParams(2.0, (0.05,), 0.0), [[0.0], [0.1]], [1.0, 2.0])
    _, var = predict(m, [[5.0]])
    assert var[0] == pytest.approx(2.0 * m.y_std**2, rel=1e-2)


def test_lml_univariate_standard_normal():
    p = KernelParams(0.5, (1.0,), 0.5)
    assert log_marginal_likelihood(p, [[0.3]], [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-9)


def test_conflicting_duplicates_need_noise():
    X = [[0.2], [0.2], [0.8]]
    with pytest.raises(IllConditioned, match="noise floor"):
        fit_gp(X, [1.0, 2.0, 0.0])
    m = fit_gp(X, [1.0, 2.0, 0.0], noise_floor=1e-2)
    assert m.params.noise_var >= 1e-2 / m.y_std**2 * (1 - 1e-9)


def test_dimension_mismatch():
    m = fit_gp([[0.1, 0.2]], [1.0])
    with pytest.raises(InvalidArgument):
        gp_predict(m, [0.5])


def test_fit_is_deterministic():
    rng = np.random.default_rng(4)
    X, y = rng.random((6, 2)), rng.normal(size=6)
    a, b = fit_gp(X, y, seed=3), fit_gp(X, y, seed=3)
    assert a.params == b.params


def test_hyperparameters_within_bounds():
    rng = np.random.default_rng(5)
    m = fit_gp(rng.random((8, 2)), rng.normal(size=8), noise_floor=1e-3)
    assert all(1e-3 <= v <= 1e3 for v in m.params.lengthscales)
    assert 1e-8 <= m.params.signal_var <= 1e6
    assert 1e-12 <= m.params.noise_var <= 1e3


datasets = st.integers(1, 6).flatmap(lambda n: st.integers(1, 2).flatmap(lambda d: st.tuples(
    st.lists(st.lists(st.floats(0, 1), min_size=d, max_size=d), min_size=n, max_size=n,
             unique_by=lambda r: tuple(round(v, 3) for v in r)),
    st.lists(st.floats(-10, 10), min_size=n, max_size=n),
    st.integers(0, 1000))))


@given(datasets)
def test_multistart_improves_on_every_start(data):
    X, y, seed = data
    m = fit_gp(np.array(X), np.array(y), noise_floor=1e-6, seed=seed)
    assert len(m.start_lml) == 8
    finite = [v for v in m.start_lml if np.isfinite(v)]
    assert model_lml(m) >= max(finite) - 1e-9


@given(datasets)
def test_posterior_variance_below_prior(data):
    X, y, seed = data
    m = fit_gp(np.array(X), np.array(y), noise_floor=1e-6, seed=seed)
    Q = np.random.default_rng(seed).random((25, len(X[0])))
    _, var = predict(m, Q)
    assert np.all(var <= m.params.signal_var * m.y_std**2 + 1e-8)
    assert np.all(var >= 0)


@given(st.integers(0, 10_000), st.integers(1, 2))
def test_more_data_never_raises_variance(seed, d):
    rng = np.random.default_rng(seed)
    X = rng.random((4, d))
    p = KernelParams(rng.uniform(0.5, 2), tuple(rng.uniform(0.05, 1, d)), rng.uniform(0, 1e-2))
    m = condition_on(p, X, rng.normal(size=4))
    m2 = add_data(m, rng.random((1, d)), rng.normal(size=1))
    Q = rng.random((30, d))
    assert np.all(predict(m2, Q)[1] <= predict(m, Q)[1] + 1e-10)


def test_se_kernel_symmetric_psd():
    X = np.random.default_rng(1).random((10, 3))
    K = se_kernel(X, X, 1.5, (0.3, 0.5, 0.7))
    np.testing.assert_allclose(K, K.T)
    assert np.min(np.linalg.eigvalsh(K)) > -1e-10
    np.testing.assert_allclose(np.diag(K), 1.5)
