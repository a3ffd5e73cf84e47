import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from estimators.errors import ValidationError
from estimators.location import spatial_median
from estimators.poet import RuleKind, poet, repair_pd, threshold_level
from estimators.precision import PrecisionMethod
from estimators.scale import mahalanobis_radii
from estimators.scatter import ScatterEstimate, ScatterKind, sample_covariance, spatial_sign_covariance
from experiments.pipelines import (
    PIPELINE_PRESETS,
    PipelineFit,
    PipelineSpec,
    fit_pipeline,
    invert_repaired,
    pipeline_preset,
)
from models import sample, scenario_preset

N, D, M = 60, 30, 3


@pytest.fixture(scope="module")
def data():
    scenario = scenario_preset("II", n=N, d=D, seed=4)
    spec, tail, B, truth = scenario.build()
    X = sample(spec, tail, N, loadings=B, rng=np.random.default_rng(11))
    return X, truth


def test_presets():
    expected = {
        "SAMPLE", "POET-SS", "POET-TME", "RegTME",
        "SAMPLE-CLIME", "SAMPLE-GLASSO", "RegTME-CLIME", "RegTME-GLASSO",
        "POET-SS-CLIME", "POET-SS-GLASSO", "POET-TME-CLIME", "POET-TME-GLASSO",
    }
    assert set(PIPELINE_PRESETS) == expected
    cases = [
        ("SAMPLE", ScatterKind.SAMPLE, False, None),
        ("POET-SS", ScatterKind.SPATIAL_SIGN, True, None),
        ("POET-TME", ScatterKind.TYLER_PLUGIN, True, None),
        ("RegTME", ScatterKind.REG_TYLER, False, None),
        ("POET-SS-CLIME", ScatterKind.SPATIAL_SIGN, True, PrecisionMethod.CLIME),
        ("POET-TME-GLASSO", ScatterKind.TYLER_PLUGIN, True, PrecisionMethod.GLASSO),
        ("SAMPLE-CLIME", ScatterKind.SAMPLE, True, PrecisionMethod.CLIME),
        ("RegTME-GLASSO", ScatterKind.REG_TYLER, True, PrecisionMethod.GLASSO),
    ]
    for name, kind, has_poet, method in cases:
        spec = pipeline_preset(name)
        assert spec.name == name
        assert spec.scatter_kind is kind
        assert (spec.poet is not None) == has_poet
        assert (spec.precision.method if spec.precision else None) is method
        assert spec.factor_count == "Known"
    assert pipeline_preset("POET-TME").initializer == "poet_inverse"
    assert pipeline_preset("POET-SS").poet.rule.kind is RuleKind.SOFT


def test_from_dict():
    assert PipelineSpec.from_dict("POET-SS") == pipeline_preset("POET-SS")

    custom = PipelineSpec.from_dict({"preset": "POET-SS", "name": "SS-GR-hard", "factor_count": "GR",
                                     "poet": {"rule": "Hard", "C": 0.5}})
    assert custom.name == "SS-GR-hard"
    assert custom.factor_count == "GR"
    assert custom.poet.rule.kind is RuleKind.HARD
    assert custom.poet.C == 0.5
    assert custom.scale_calibration

    again = PipelineSpec.from_dict(custom.to_dict())
    assert again == custom


@pytest.mark.parametrize(
    "cfg",
    [
        "POET-XX",
        {"preset": "POET-SS", "threshold": 0.1},
        {"name": "no-kind"},
        {"name": "bad-kind", "scatter_kind": "Huber"},
        {"name": "plugin", "scatter_kind": "TylerPlugin", "poet": {"rule": "Soft"}},
        {"name": "plugin", "scatter_kind": "TylerPlugin", "initializer": "ridge"},
        {"name": "prec", "scatter_kind": "SpatialSign", "precision": {"method": "CLIME"}},
        {"preset": "POET-SS", "factor_count": "BIC"},
        {"preset": "POET-SS-CLIME", "precision": {"method": "Ledoit"}},
        {"preset": "POET-TME", "plugin_iterations": 0},
    ],
)
def test_invalid_pipelines(cfg):
    with pytest.raises(ValidationError):
        PipelineSpec.from_dict(cfg)


@pytest.mark.parametrize("name", ["SAMPLE", "POET-SS", "POET-TME", "RegTME"])
def test_fit_shapes_and_trace(data, name):
    X, _ = data
    fit = fit_pipeline(X, pipeline_preset(name), m=M)
    assert fit.name == name
    assert fit.m_used == M
    assert fit.sigma0_hat.shape == (D, D)
    assert fit.sigma0u_hat.shape == (D, D)
    assert fit.lambda_hat.shape == (M,)
    assert fit.gamma_hat.shape == (D, M)
    assert np.abs(fit.sigma0_hat - fit.sigma0_hat.T).max() <= 1e-10
    assert np.trace(fit.scatter.matrix) == pytest.approx(D)
    assert np.trace(fit.sigma0_hat) == pytest.approx(D)
    assert np.all(np.diff(fit.lambda_hat) <= 0)
    assert fit.v0_hat is None


def test_sample_pipeline_reports_the_raw_covariance(data):
    X, _ = data
    fit = fit_pipeline(X, pipeline_preset("SAMPLE"), m=M)
    np.testing.assert_allclose(fit.cov_hat, sample_covariance(X).matrix)
    np.testing.assert_allclose(fit.sigma0_hat, sample_covariance(X, normalize_to_scatter=True).matrix)
    assert fit.poet is None
    assert fit.scale is None


@pytest.mark.parametrize("name", ["POET-SS", "POET-TME"])
def test_scale_calibration(data, name):
    X, _ = data
    fit = fit_pipeline(X, pipeline_preset(name), m=M)
    assert fit.scale is not None and fit.scale.theta_hat > 0
    np.testing.assert_allclose(fit.cov_hat, fit.scale.theta_hat * fit.sigma0_hat)
    assert fit.poet is not None and fit.poet.split.lambda_m.shape == (M,)


def test_tyler_calibration_uses_the_pilot_precision(data):
    X, _ = data
    spec = pipeline_preset("POET-TME")
    fit = fit_pipeline(X, spec, m=M)
    mu = spatial_median(X).mu_hat
    pilot = poet(spatial_sign_covariance(X, mu), M, threshold_level(N, D, spec.poet.C), spec.poet.rule, pd_repair=True)
    v_s = np.linalg.inv(repair_pd(pilot.sigma_tau))

    np.testing.assert_allclose(fit.v_s_pilot, v_s, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(fit.scale.radii, mahalanobis_radii(X, mu, v_s), rtol=1e-8)
    own = mahalanobis_radii(X, mu, invert_repaired(fit.sigma0_hat))
    assert not np.allclose(fit.scale.radii, own)


def test_spatial_sign_calibration_uses_its_own_inverse(data):
    X, _ = data
    fit = fit_pipeline(X, pipeline_preset("POET-SS"), m=M)
    assert fit.v_s_pilot is None
    mu = spatial_median(X).mu_hat
    np.testing.assert_allclose(fit.scale.radii, mahalanobis_radii(X, mu, invert_repaired(fit.sigma0_hat)), rtol=1e-8)


def test_regtme_has_no_threshold(data):
    X, _ = data
    fit = fit_pipeline(X, pipeline_preset("RegTME"), m=M)
    np.testing.assert_array_equal(fit.sigma0_hat, fit.scatter.matrix)
    assert fit.scatter.alpha is not None and fit.scatter.alpha > 0


def test_given_location_is_used(data):
    X, _ = data
    mu = np.zeros(D)
    fit = fit_pipeline(X, pipeline_preset("POET-SS"), m=M, mu=mu)
    np.testing.assert_array_equal(fit.scatter.center, mu)


def test_reporting_rank(data):
    X, _ = data
    fit = fit_pipeline(X, pipeline_preset("POET-SS"), m=M, m_report=5)
    assert fit.m_used == M
    assert fit.lambda_hat.shape == (5,)
    assert fit.gamma_hat.shape == (D, 5)


@pytest.mark.parametrize("count", ["ER", "GR"])
def test_estimated_factor_count(data, count):
    X, _ = data
    spec = PipelineSpec.from_dict({"preset": "POET-SS", "factor_count": count})
    fit = fit_pipeline(X, spec)
    assert 1 <= fit.m_used <= spec.max_factors
    assert fit.lambda_hat.shape == (fit.m_used,)


def test_known_count_needs_m(data):
    X, _ = data
    with pytest.raises(ValidationError):
        fit_pipeline(X, pipeline_preset("POET-SS"))


def test_factor_search_needs_room():
    X = np.random.default_rng(0).normal(size=(2, 10))
    spec = PipelineSpec.from_dict({"preset": "POET-SS", "factor_count": "GR"})
    with pytest.raises(ValidationError):
        fit_pipeline(X, spec)


@pytest.mark.parametrize("name", ["POET-SS-CLIME", "POET-SS-GLASSO", "POET-TME-GLASSO", "SAMPLE-CLIME", "RegTME-GLASSO"])
def test_precision_pipelines(data, name):
    X, _ = data
    fit = fit_pipeline(X, pipeline_preset(name), m=M)
    assert fit.v0_hat.shape == (D, D)
    assert fit.v0u_hat.shape == (D, D)
    assert np.abs(fit.v0_hat - fit.v0_hat.T).max() <= 1e-10
    assert fit.precision.method is pipeline_preset(name).precision.method
    assert fit.inverse() is fit.v0_hat
    assert fit.cov_hat is not None


@pytest.mark.parametrize("initializer", ["clime", "glasso"])
def test_plugin_initializers(data, initializer):
    X, _ = data
    spec = PipelineSpec.from_dict({"preset": "POET-TME", "initializer": initializer, "plugin_iterations": 2})
    fit = fit_pipeline(X, spec, m=M)
    assert fit.scatter.kind is ScatterKind.TYLER_PLUGIN
    assert fit.scatter.iterations == 2
    assert np.trace(fit.scatter.matrix) == pytest.approx(D)


def test_inverse():
    cov = np.diag([2.0, 4.0, 5.0])
    scatter = ScatterEstimate(matrix=np.eye(3), kind=ScatterKind.SAMPLE)
    fit = PipelineFit(
        name="x",
        m_used=0,
        scatter=scatter,
        sigma0_hat=np.eye(3),
        sigma0u_hat=np.eye(3),
        lambda_hat=np.zeros(0),
        gamma_hat=np.zeros((3, 0)),
        cov_hat=cov,
    )
    np.testing.assert_allclose(fit.inverse(), np.diag([0.5, 0.25, 0.2]))
    fit.cov_hat = None
    np.testing.assert_allclose(fit.inverse(), np.eye(3))
