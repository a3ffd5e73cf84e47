"""
Estimator pipelines: raw scatter -> factor count -> POET -> optional
precision and covariance-scale calibration, described by a PipelineSpec so
that experiments can be configured from YAML.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import scipy.linalg as sla

from estimators.errors import NumericError, ValidationError
from estimators.location import spatial_median
from estimators.poet import DEFAULT_C, PoetEstimate, ThresholdRule, poet, repair_pd, threshold_level
from estimators.precision import PrecisionEstimate, PrecisionMethod, estimate_precision
from estimators.scale import HuberScale, scaled_covariance
from estimators.scatter import (
    ScatterEstimate,
    ScatterKind,
    reg_tyler,
    regtyler_alpha_default,
    sample_covariance,
    spatial_sign_covariance,
    symmetrize,
    tyler_plugin,
)
from estimators.spectral import DEFAULT_MAX_FACTORS, FactorCountMethod, eigendecompose, estimate_num_factors, split

logger = logging.getLogger(__name__)

FACTOR_COUNTS = ("Known", "ER", "GR")
INITIALIZERS = ("poet_inverse", "clime", "glasso")


@dataclass
class PoetConfig:
    rule: ThresholdRule = field(default_factory=ThresholdRule)
    C: float = DEFAULT_C

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "PoetConfig":
        return cls(rule=ThresholdRule.from_value(cfg.get("rule")), C=float(cfg.get("C", DEFAULT_C)))

    def to_dict(self) -> Dict[str, Any]:
        return {"rule": self.rule.to_dict(), "C": self.C}


@dataclass
class PrecisionConfig:
    method: PrecisionMethod = PrecisionMethod.CLIME
    C: float = DEFAULT_C

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "PrecisionConfig":
        try:
            method = PrecisionMethod(cfg.get("method", "CLIME"))
        except ValueError as e:
            raise ValidationError(f"Unknown precision method {cfg.get('method')!r}") from e
        return cls(method=method, C=float(cfg.get("C", DEFAULT_C)))

    def to_dict(self) -> Dict[str, Any]:
        return {"method": self.method.value, "C": self.C}


@dataclass
class PipelineSpec:
    name: str
    scatter_kind: ScatterKind
    poet: Optional[PoetConfig] = None
    precision: Optional[PrecisionConfig] = None
    factor_count: str = "Known"
    scale_calibration: bool = False
    # pilot precision for the Tyler plug-in
    initializer: Optional[str] = None
    plugin_iterations: int = 1
    max_factors: int = DEFAULT_MAX_FACTORS

    def __post_init__(self):
        self.scatter_kind = ScatterKind(self.scatter_kind)
        if self.factor_count not in FACTOR_COUNTS:
            raise ValidationError(f"{self.name}: factor_count must be one of {FACTOR_COUNTS}, got {self.factor_count!r}")
        if self.scatter_kind is ScatterKind.TYLER_PLUGIN:
            if self.initializer not in INITIALIZERS:
                raise ValidationError(
                    f"{self.name}: the Tyler plug-in needs an initializer in {INITIALIZERS}, got {self.initializer!r}"
                )
        if self.precision is not None and self.poet is None:
            raise ValidationError(f"{self.name}: precision estimation needs a POET step")
        if self.plugin_iterations < 1:
            raise ValidationError(f"{self.name}: plugin_iterations must be >= 1")

    @classmethod
    def from_dict(cls, cfg: Any) -> "PipelineSpec":
        """A preset name, or a mapping optionally starting from a preset via 'preset'."""
        if isinstance(cfg, str):
            return pipeline_preset(cfg)
        cfg = dict(cfg)
        base: Dict[str, Any] = {}
        if "preset" in cfg:
            base = pipeline_preset(cfg.pop("preset")).to_dict()
        merged = {**base, **cfg}
        known = {
            "name", "scatter_kind", "poet", "precision", "factor_count",
            "scale_calibration", "initializer", "plugin_iterations", "max_factors",
        }
        unknown = set(merged) - known
        if unknown:
            raise ValidationError(f"Unknown pipeline keys: {sorted(unknown)}")
        if "name" not in merged or "scatter_kind" not in merged:
            raise ValidationError("A pipeline needs 'name' and 'scatter_kind'")
        try:
            kind = ScatterKind(merged["scatter_kind"])
        except ValueError as e:
            raise ValidationError(f"Unknown scatter kind {merged['scatter_kind']!r}") from e
        return cls(
            name=str(merged["name"]),
            scatter_kind=kind,
            poet=PoetConfig.from_dict(merged["poet"]) if merged.get("poet") is not None else None,
            precision=PrecisionConfig.from_dict(merged["precision"]) if merged.get("precision") is not None else None,
            factor_count=merged.get("factor_count", "Known"),
            scale_calibration=bool(merged.get("scale_calibration", False)),
            initializer=merged.get("initializer"),
            plugin_iterations=int(merged.get("plugin_iterations", 1)),
            max_factors=int(merged.get("max_factors", DEFAULT_MAX_FACTORS)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "scatter_kind": self.scatter_kind.value,
            "poet": None if self.poet is None else self.poet.to_dict(),
            "precision": None if self.precision is None else self.precision.to_dict(),
            "factor_count": self.factor_count,
            "scale_calibration": self.scale_calibration,
            "initializer": self.initializer,
            "plugin_iterations": self.plugin_iterations,
            "max_factors": self.max_factors,
        }


def _presets() -> Dict[str, Dict[str, Any]]:
    soft = {"rule": "Soft", "C": DEFAULT_C}
    presets = {
        "SAMPLE": {"scatter_kind": "Sample", "scale_calibration": False},
        "POET-SS": {"scatter_kind": "SpatialSign", "poet": soft, "scale_calibration": True},
        "POET-TME": {
            "scatter_kind": "TylerPlugin",
            "poet": soft,
            "initializer": "poet_inverse",
            "scale_calibration": True,
        },
        "RegTME": {"scatter_kind": "RegTyler", "scale_calibration": True},
    }
    for base in ("SAMPLE", "POET-SS", "POET-TME", "RegTME"):
        for method in ("CLIME", "GLASSO"):
            # precision needs a POET step; the baselines get a soft one
            presets[f"{base}-{method}"] = {
                "poet": soft,
                **presets[base],
                "precision": {"method": method, "C": DEFAULT_C},
            }
    return {name: {"name": name, **cfg} for name, cfg in presets.items()}


PIPELINE_PRESETS = _presets()


def pipeline_preset(name: str) -> PipelineSpec:
    if name not in PIPELINE_PRESETS:
        raise ValidationError(f"Unknown pipeline {name!r}. Expected one of: {sorted(PIPELINE_PRESETS)}")
    return PipelineSpec.from_dict(dict(PIPELINE_PRESETS[name]))


@dataclass
class PipelineFit:
    name: str
    m_used: int
    scatter: ScatterEstimate
    sigma0_hat: np.ndarray
    sigma0u_hat: np.ndarray
    lambda_hat: np.ndarray
    gamma_hat: np.ndarray
    cov_hat: Optional[np.ndarray] = None
    v0_hat: Optional[np.ndarray] = None
    v0u_hat: Optional[np.ndarray] = None
    poet: Optional[PoetEstimate] = None
    precision: Optional[PrecisionEstimate] = None
    scale: Optional[HuberScale] = None
    # spatial-sign pilot precision of the Tyler plug-in
    v_s_pilot: Optional[np.ndarray] = None

    def inverse(self) -> np.ndarray:
        """Inverse of the fitted matrix (precision estimate when present)."""
        if self.v0_hat is not None:
            return self.v0_hat
        target = self.cov_hat if self.cov_hat is not None else self.sigma0_hat
        return invert_repaired(target)


def invert_repaired(M: np.ndarray) -> np.ndarray:
    try:
        inv = sla.inv(repair_pd(M))
    except (sla.LinAlgError, ValueError) as e:
        raise NumericError(f"cannot invert the fitted matrix: {e}") from e
    return 0.5 * (inv + inv.T)


def _count_factors(spec: PipelineSpec, scatter: ScatterEstimate, n: int, m: Optional[int]) -> int:
    if spec.factor_count == "Known":
        if m is None:
            raise ValidationError(f"{spec.name}: factor_count 'Known' needs the number of factors")
        return int(m)
    eigs, _ = eigendecompose(scatter.matrix)
    d = eigs.shape[0]
    M = min(spec.max_factors, min(n, d) - 2)
    if M < 1:
        raise ValidationError(f"{spec.name}: n={n}, d={d} leave no room for a factor count search")
    result = estimate_num_factors(eigs, M=M, method=FactorCountMethod(spec.factor_count), n=n, d=d)
    return result.m_hat


def _pilot_precision(
    spec: PipelineSpec, X: np.ndarray, mu: np.ndarray, m: int, tau: float, threads: int
) -> np.ndarray:
    """V_S for the Tyler plug-in, from a POET fit of the spatial-sign covariance."""
    rule = spec.poet.rule if spec.poet is not None else ThresholdRule()
    pilot = poet(spatial_sign_covariance(X, mu), m, tau, rule, pd_repair=True)
    if spec.initializer == "poet_inverse":
        return invert_repaired(pilot.sigma_tau)
    method = PrecisionMethod.CLIME if spec.initializer == "clime" else PrecisionMethod.GLASSO
    return repair_pd(estimate_precision(pilot, method, tau, threads=threads).v0)


def fit_pipeline(
    X: np.ndarray,
    spec: PipelineSpec,
    m: Optional[int] = None,
    mu: Optional[np.ndarray] = None,
    m_report: Optional[int] = None,
    threads: int = 1,
) -> PipelineFit:
    """
    Run one pipeline on an n x d sample.

    ``m`` is the factor count for factor_count='Known'; ``m_report`` is the
    rank at which the leading eigenpairs of the raw scatter are reported
    (defaults to the count actually used). ``mu`` skips the spatial median.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    needs_location = spec.scale_calibration or spec.scatter_kind in (ScatterKind.SPATIAL_SIGN, ScatterKind.TYLER_PLUGIN)
    if mu is None and needs_location:
        mu = spatial_median(X).mu_hat

    tau = threshold_level(n, d, spec.poet.C) if spec.poet is not None else 0.0
    v_s = None

    if spec.scatter_kind is ScatterKind.SAMPLE:
        scatter = sample_covariance(X, normalize_to_scatter=True)
    elif spec.scatter_kind is ScatterKind.SPATIAL_SIGN:
        scatter = spatial_sign_covariance(X, mu)
    elif spec.scatter_kind is ScatterKind.TYLER_PLUGIN:
        # the pilot always starts from the spatial-sign covariance
        pilot_m = _count_factors(spec, spatial_sign_covariance(X, mu), n, m)
        pilot_tau = tau if spec.poet is not None else threshold_level(n, d, DEFAULT_C)
        v_s = _pilot_precision(spec, X, mu, pilot_m, pilot_tau, threads)
        refine = None
        if spec.poet is not None:
            def refine(S, _m=pilot_m, _tau=pilot_tau, _rule=spec.poet.rule):
                return poet(S, _m, _tau, _rule, pd_repair=True).sigma_tau
        scatter = tyler_plugin(X, mu, v_s, iterations=spec.plugin_iterations, refine=refine)
    else:
        X_sym = symmetrize(X)
        scatter = reg_tyler(X_sym, regtyler_alpha_default(X_sym, n=n))

    m_used = _count_factors(spec, scatter, n, m)

    poet_estimate = None
    if spec.poet is not None:
        poet_estimate = poet(scatter, m_used, tau, spec.poet.rule)
        sigma0_hat = poet_estimate.sigma_tau
        sigma0u_hat = poet_estimate.sigma_u_tau
    else:
        sigma0_hat = scatter.matrix
        sigma0u_hat = split(scatter.matrix, m_used).residual

    reported = split(scatter.matrix, m_used if m_report is None else m_report)

    fit = PipelineFit(
        name=spec.name,
        m_used=m_used,
        scatter=scatter,
        sigma0_hat=sigma0_hat,
        sigma0u_hat=sigma0u_hat,
        lambda_hat=reported.lambda_m,
        gamma_hat=reported.gamma_m,
        poet=poet_estimate,
        v_s_pilot=v_s,
    )

    if spec.precision is not None:
        prec_tau = threshold_level(n, d, spec.precision.C)
        fit.precision = estimate_precision(poet_estimate, spec.precision.method, prec_tau, threads=threads)
        fit.v0_hat = fit.precision.v0
        fit.v0u_hat = fit.precision.v0_u

    if spec.scatter_kind is ScatterKind.SAMPLE:
        fit.cov_hat = sample_covariance(X).matrix
    elif spec.scale_calibration:
        # radii come from V_S: the Tyler pilot, else the pipeline's own precision
        if fit.v_s_pilot is not None:
            radii_v = fit.v_s_pilot
        elif fit.v0_hat is not None:
            # CLIME output is symmetric but not necessarily positive definite
            radii_v = repair_pd(fit.v0_hat)
        else:
            radii_v = invert_repaired(sigma0_hat)
        calibrated = scaled_covariance(X, mu, sigma0_hat, v_s=radii_v)
        fit.cov_hat = calibrated.covariance
        fit.scale = calibrated.scale

    logger.debug("%s fitted (n=%d, d=%d, m=%d)", spec.name, n, d, m_used)
    return fit
