import numpy as np
import pytest

from medstate.errors import DimensionMismatch, SingleClass
from medstate.lda import classify, fit_lda, project


def _blobs(rng, n, dist, sigma=0.1, dim=2):
    mu = np.zeros(dim)
    mu[0] = dist / 2
    X = np.vstack([rng.normal(-mu, sigma, (n, dim)), rng.normal(mu, sigma, (n, dim))])
    return X, np.repeat([0, 1], n)


def test_one_dim_threshold(rng):
    X = np.concatenate([rng.normal(-1, 0.1, 50), rng.normal(1, 0.1, 50)])[:, None]
    y = np.repeat([0, 1], 50)
    m = fit_lda(X, y)
    assert abs(m.threshold) <= 0.05
    # midpoint of the class means, exactly
    mid = 0.5 * (X[y == 0].mean() + X[y == 1].mean())
    assert np.isclose(m.threshold / m.direction[0], mid, rtol=0, atol=1e-12)


def test_no_signal_is_chance(rng):
    X, y = rng.standard_normal((400, 3)), np.repeat([0, 1], 200)
    m = fit_lda(X, y)
    fresh = rng.standard_normal((2000, 3))
    yf = rng.integers(0, 2, 2000)
    assert abs(np.mean(m.classify(fresh) == yf) - 0.5) <= 0.1


def test_linear_map_invariance(rng):
    X = rng.standard_normal((40, 4))
    y = np.repeat([0, 1], 20)
    X[y == 1] += 0.7
    M = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    assert np.array_equal(fit_lda(X, y).classify(X), fit_lda(X @ M.T, y).classify(X @ M.T))


def test_scaling_invariance(rng):
    X, y = _blobs(rng, 30, 1.0, sigma=0.5)
    for c in (1e-3, 7.0):
        assert np.array_equal(fit_lda(X, y).classify(X), fit_lda(c * X, y).classify(c * X))


def test_means_and_tie(rng):
    X, y = _blobs(rng, 40, 2.0)
    m = fit_lda(X, y)
    assert np.isclose(np.linalg.norm(m.direction), 1.0)
    mu0, mu1 = m.class_means
    assert project(m, mu1) > m.threshold > project(m, mu0)
    assert classify(m, mu1) == 1 and classify(m, mu0) == 0
    on_boundary = m.threshold * m.direction
    assert np.isclose(project(m, on_boundary), m.threshold)
    tie = type(m)(m.direction, float(project(m, on_boundary)), m.class_means, m.pooled_cov_ridge)
    assert classify(tie, on_boundary) == 0


def test_projection_linear(rng):
    X, y = _blobs(rng, 20, 2.0)
    m = fit_lda(X, y)
    a, b = rng.standard_normal((2, 2))
    assert abs(project(m, a + b) - project(m, a) - project(m, b)) <= 1e-12
    assert project(m, np.zeros(2)) == 0.0


def test_separable_blobs(rng):
    X, y = _blobs(rng, 100, 4.0)
    m = fit_lda(X, y)
    Xt, yt = _blobs(rng, 200, 4.0)
    assert np.mean(m.classify(Xt) == yt) >= 0.99


def test_singular_scatter_is_handled(rng):
    # more features than samples: the ridge keeps the solve well posed
    X = rng.standard_normal((6, 20))
    y = np.array([0, 0, 0, 1, 1, 1])
    m = fit_lda(X, y)
    assert np.all(np.isfinite(m.direction)) and m.pooled_cov_ridge > 0


def test_errors(rng):
    with pytest.raises(SingleClass):
        fit_lda(rng.standard_normal((5, 2)), np.zeros(5))
    with pytest.raises(DimensionMismatch):
        fit_lda(rng.standard_normal((5, 2)), np.zeros(4))
    m = fit_lda(*_blobs(rng, 10, 2.0))
    with pytest.raises(DimensionMismatch):
        m.project(np.zeros(3))
