"""
Elliptical factor model y = B f + u and its ground-truth matrices.

Loadings are drawn column-wise, B[:, j] ~ N(0, s_j). Data rows are drawn
jointly as (f, u) from an elliptical family with covariance
c * diag(I_m, Sigma_u), where c = d / tr(B B' + Sigma_u), so the scatter
of y is normalized to trace d.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from estimators.errors import NumericError, ValidationError
from estimators.spectral import split
from .base_family import BaseTailFamily

LOADING_STREAM = 0
SAMPLE_STREAM = 1


def ar1_matrix(d: int, rho: float) -> np.ndarray:
    """Toeplitz matrix (rho^|i-j|)."""
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    if not -1.0 < rho < 1.0:
        raise ValidationError(f"rho must lie in (-1, 1), got {rho}")
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def ar1_precision_design(d: int, rho: float = 0.4) -> np.ndarray:
    """Sigma_u whose inverse is (rho^|i-j|), the sparse-precision design."""
    sigma_u = sla.inv(ar1_matrix(d, rho))
    return 0.5 * (sigma_u + sigma_u.T)


@dataclass
class FactorModelSpec:
    d: int
    m: int
    loading_variances: Sequence[float]
    idiosyncratic_cov: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.loading_variances = [float(s) for s in self.loading_variances]
        self.idiosyncratic_cov = np.asarray(self.idiosyncratic_cov, dtype=float)
        self.validate()

    def validate(self) -> None:
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if not 0 <= self.m <= self.d:
            raise ValidationError(f"need 0 <= m <= d, got m={self.m}, d={self.d}")
        if len(self.loading_variances) != self.m:
            raise ValidationError(
                f"expected {self.m} loading variances, got {len(self.loading_variances)}"
            )
        if any(not s > 0 for s in self.loading_variances):
            raise ValidationError(f"loading variances must be positive: {self.loading_variances}")
        cov = self.idiosyncratic_cov
        if cov.shape != (self.d, self.d):
            raise ValidationError(f"idiosyncratic_cov must be {self.d}x{self.d}, got {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(cov).max())):
            raise ValidationError("idiosyncratic_cov must be symmetric")
        if sla.eigvalsh(cov)[0] <= 0:
            raise ValidationError("idiosyncratic_cov must be positive definite")


@dataclass
class GroundTruth:
    sigma0: np.ndarray
    sigma0_u: np.ndarray
    gamma_m: np.ndarray
    lambda_m: np.ndarray
    v0: np.ndarray
    v0_u: np.ndarray
    cov_x: np.ndarray

    @property
    def d(self) -> int:
        return self.sigma0.shape[0]

    @property
    def m(self) -> int:
        return self.gamma_m.shape[1]


def build_loadings(spec: FactorModelSpec) -> np.ndarray:
    """d x m loadings, column j i.i.d. N(0, s_j); reproducible from spec.seed."""
    spec.validate()
    rng = np.random.default_rng([spec.seed, LOADING_STREAM])
    scale = np.sqrt(np.asarray(spec.loading_variances, dtype=float))
    return rng.standard_normal((spec.d, spec.m)) * scale[None, :]


def normalization_constant(B: np.ndarray, sigma_u: np.ndarray) -> float:
    """c = d / tr(B B' + Sigma_u)."""
    d = sigma_u.shape[0]
    return d / (float(np.sum(B * B)) + float(np.trace(sigma_u)))


def _inverse(matrix: np.ndarray, what: str) -> np.ndarray:
    try:
        inv = sla.inv(matrix)
    except (sla.LinAlgError, ValueError) as e:
        raise NumericError(f"{what} is singular: {e}") from e
    if not np.all(np.isfinite(inv)):
        raise NumericError(f"{what} is singular")
    return 0.5 * (inv + inv.T)


def ground_truth(B: np.ndarray, sigma_u: np.ndarray, cov_scale: float = 1.0) -> GroundTruth:
    """
    Population scatter Sigma0 = c (B B' + Sigma_u), its rank-m spectral split,
    the corresponding precision matrices and cov_x = cov_scale (B B' + Sigma_u).

    ``cov_scale`` lets callers express the covariance of the generated data,
    which is c * E(s^2) (B B' + Sigma_u) for a family with radial moment E(s^2).
    """
    B = np.asarray(B, dtype=float)
    sigma_u = np.asarray(sigma_u, dtype=float)
    d = sigma_u.shape[0]
    if B.ndim != 2 or B.shape[0] != d:
        raise ValidationError(f"loadings must be {d} x m, got {B.shape}")
    full = B @ B.T + sigma_u
    full = 0.5 * (full + full.T)
    trace = np.trace(full)
    if not trace > 0:
        raise NumericError("B B' + Sigma_u has nonpositive trace")
    sigma0 = (d / trace) * full
    parts = split(sigma0, B.shape[1])
    return GroundTruth(
        sigma0=sigma0,
        sigma0_u=parts.residual,
        gamma_m=parts.gamma_m,
        lambda_m=parts.lambda_m,
        v0=_inverse(sigma0, "Sigma0"),
        v0_u=_inverse(parts.residual, "Sigma0_u"),
        cov_x=cov_scale * full,
    )


def sample(
    spec: FactorModelSpec,
    tail: BaseTailFamily,
    n: int,
    loadings: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    n x d data matrix with rows y = B f + u, (f, u) drawn jointly from ``tail``
    with covariance c * diag(I_m, Sigma_u).

    Without ``rng`` the draw is seeded from spec.seed; the harness passes
    its own per-replicate generators.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    B = build_loadings(spec) if loadings is None else np.asarray(loadings, dtype=float)
    if B.shape != (spec.d, spec.m):
        raise ValidationError(f"loadings must be {spec.d} x {spec.m}, got {B.shape}")
    if rng is None:
        rng = np.random.default_rng([spec.seed, SAMPLE_STREAM])

    c = normalization_constant(B, spec.idiosyncratic_cov)
    chol = np.zeros((spec.m + spec.d, spec.m + spec.d))
    chol[: spec.m, : spec.m] = np.eye(spec.m)
    chol[spec.m:, spec.m:] = sla.cholesky(spec.idiosyncratic_cov, lower=True)
    chol *= np.sqrt(c)

    fu = tail.draw(rng, chol, n)
    return fu[:, : spec.m] @ B.T + fu[:, spec.m:]
