import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from estimators.errors import NumericError, ValidationError
from estimators.scale import (
    HuberScale,
    covariance_from_scatter,
    default_h,
    huber_scale,
    mahalanobis_radii,
    scaled_covariance,
)
from estimators.scatter import sample_covariance
from models import sample, scenario_preset


def test_mahalanobis_radii():
    X = np.array([[3.0, 4.0], [1.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(mahalanobis_radii(X, np.zeros(2), np.eye(2)), [12.5, 1.0, 0.0])
    np.testing.assert_allclose(mahalanobis_radii(X, np.array([1.0, 1.0]), np.diag([2.0, 1.0])), [8.5, 0.0, 1.5])
    with pytest.raises(NumericError):
        mahalanobis_radii(X, np.zeros(2), np.diag([1.0, -1.0]))
    with pytest.raises(ValidationError):
        mahalanobis_radii(X, np.zeros(2), np.eye(3))


def test_huber_scale_cases():
    cases = [
        (np.full(7, 4.0), 10.0, 4.0),
        (np.array([1.0, 2.0, 9.0]), 3.0, 3.0),
        # every theta in [1, 9] solves the equation
        (np.array([0.0, 10.0]), 1.0, 5.0),
        (np.array([2.5]), 0.1, 2.5),
    ]
    for radii, h, expected in cases:
        assert huber_scale(radii, h).theta_hat == pytest.approx(expected, abs=1e-12)


def test_large_h_gives_the_mean():
    radii = np.random.default_rng(0).chisquare(3, size=40)
    assert huber_scale(radii, 1e6).theta_hat == pytest.approx(radii.mean(), rel=1e-9)


@pytest.mark.parametrize("seed", range(100))
def test_estimating_equation_residual(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 200))
    radii = rng.standard_t(df=2, size=n) ** 2
    h = float(rng.uniform(0.05, 20.0))
    fit = huber_scale(radii, h)
    assert abs(fit.residual()) <= 1e-9 * n * h
    assert fit.theta_hat >= 0


def test_translation_and_bounded_influence():
    rng = np.random.default_rng(1)
    radii = rng.chisquare(5, size=200) / 5
    h = 0.5
    base = huber_scale(radii, h).theta_hat
    assert huber_scale(radii + 0.75, h).theta_hat == pytest.approx(base + 0.75, abs=1e-10)

    polluted = radii.copy()
    polluted[0] = 1e6
    assert abs(huber_scale(polluted, h).theta_hat - base) <= 2 * h / radii.shape[0] + 1e-9


@pytest.mark.parametrize("radii, h", [(np.array([]), 1.0), (np.ones(3), 0.0), (np.array([1.0, np.inf]), 1.0)])
def test_huber_scale_errors(radii, h):
    with pytest.raises(ValidationError):
        huber_scale(radii, h)


def test_default_h():
    assert default_h(256, epsilon=2.0) == pytest.approx(16.0)
    assert default_h(256, epsilon=2.0, c=2.0) == pytest.approx(32.0)
    assert default_h(1000, epsilon=1e-9) == pytest.approx(1000.0, rel=1e-6)
    assert default_h(1000) == pytest.approx(100.0)
    for kwargs in ({"n": 10, "epsilon": 0.0}, {"n": 10, "epsilon": 2.5}, {"n": 10, "c": 0.0}, {"n": 0}):
        with pytest.raises(ValidationError):
            default_h(**kwargs)


def test_covariance_from_scatter():
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(covariance_from_scatter(S, 1.0), S)
    np.testing.assert_array_equal(covariance_from_scatter(S, 0.0), np.zeros((2, 2)))
    fit = HuberScale(theta_hat=3.0, h=1.0, radii=np.ones(2))
    np.testing.assert_allclose(covariance_from_scatter(sample_covariance(np.eye(2)), fit), 3.0 * sample_covariance(np.eye(2)).matrix)
    with pytest.raises(ValidationError):
        covariance_from_scatter(S, -1.0)


def test_gaussian_covariance_recovery():
    scenario = scenario_preset("I", n=2000, d=50, seed=3)
    spec, tail, B, truth = scenario.build()
    X = sample(spec, tail, 2000, loadings=B, rng=np.random.default_rng(0))
    scatter = sample_covariance(X, normalize_to_scatter=True)
    fitted = scaled_covariance(X, X.mean(axis=0), scatter)
    error = np.linalg.norm(fitted.covariance - truth.cov_x) / np.linalg.norm(truth.cov_x)
    assert error < 0.1
    assert fitted.scale.h == pytest.approx(default_h(2000))
