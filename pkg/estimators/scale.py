"""
Covariance-scale calibration of a trace-normalized scatter estimate.

The scatter matrix fixes the shape of the covariance only; the missing
scalar d^{-1} E(r^2) is estimated by a Huber M-estimator applied to the
squared Mahalanobis radii of the data.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .errors import NumericError, ValidationError
from .scatter import ScatterEstimate

logger = logging.getLogger(__name__)

ROOT_TOL = 1e-12


@dataclass
class HuberScale:
    theta_hat: float
    h: float
    radii: np.ndarray

    def residual(self, theta: Optional[float] = None) -> float:
        """sum_i H_h(radii_i - theta), at theta_hat by default."""
        theta = self.theta_hat if theta is None else theta
        return float(np.clip(self.radii - theta, -self.h, self.h).sum())


@dataclass
class ScaledCovariance:
    covariance: np.ndarray
    scale: HuberScale


def mahalanobis_radii(X: np.ndarray, mu: np.ndarray, v_s: np.ndarray) -> np.ndarray:
    """d^{-1} (X_i - mu)' v_s (X_i - mu) for every row."""
    X = np.asarray(X, dtype=float)
    v_s = np.asarray(v_s, dtype=float)
    d = X.shape[1]
    if v_s.shape != (d, d):
        raise ValidationError(f"v_s must be {d} x {d}, got {v_s.shape}")
    try:
        L = sla.cholesky(0.5 * (v_s + v_s.T), lower=True)
    except (sla.LinAlgError, ValueError) as e:
        raise NumericError(f"v_s is not positive definite: {e}") from e
    W = (X - np.asarray(mu, dtype=float)) @ L
    return np.einsum("ij,ij->i", W, W) / d


def _estimating_function(sorted_radii: np.ndarray, prefix: np.ndarray, h: float, theta: np.ndarray) -> np.ndarray:
    n = sorted_radii.shape[0]
    upper = np.searchsorted(sorted_radii, theta + h, side="left")
    lower = np.searchsorted(sorted_radii, theta - h, side="right")
    inside = upper - lower
    inside_sum = prefix[upper] - prefix[lower]
    return h * (n - upper) - h * lower + inside_sum - inside * theta


def huber_scale(radii: np.ndarray, h: float) -> HuberScale:
    """
    Root of theta -> sum_i H_h(radii_i - theta), H_h(x) = min(h, max(-h, x)).

    The function is piecewise linear and nonincreasing with breakpoints at
    radii_i +/- h, so it is evaluated at the sorted breakpoints and the root
    read off exactly. When the root set is an interval its midpoint is
    returned.
    """
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if radii.shape[0] < 1:
        raise ValidationError("huber_scale needs at least one radius")
    if not h > 0:
        raise ValidationError(f"h must be positive, got {h}")
    if not np.all(np.isfinite(radii)):
        raise ValidationError("radii must be finite")

    r = np.sort(radii)
    prefix = np.concatenate([[0.0], np.cumsum(r)])
    knots = np.unique(np.concatenate([r - h, r + h]))
    values = _estimating_function(r, prefix, h, knots)
    tol = ROOT_TOL * r.shape[0] * h

    zero = np.flatnonzero(np.abs(values) <= tol)
    if zero.size:
        theta = 0.5 * (knots[zero[0]] + knots[zero[-1]])
    else:
        # values[0] = n h > 0 and values[-1] = -n h < 0
        k = int(np.flatnonzero(values > 0)[-1])
        g0, g1 = values[k], values[k + 1]
        theta = knots[k] + g0 * (knots[k + 1] - knots[k]) / (g0 - g1)
    return HuberScale(float(theta), float(h), radii)


def default_h(n: int, epsilon: float = 1.0, c: float = 1.0) -> float:
    """c * n^(2 / (2 + epsilon))."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not 0 < epsilon <= 2:
        raise ValidationError(f"epsilon must lie in (0, 2], got {epsilon}")
    if not c > 0:
        raise ValidationError(f"c must be positive, got {c}")
    return c * n ** (2.0 / (2.0 + epsilon))


def covariance_from_scatter(
    scatter: Union[ScatterEstimate, np.ndarray], theta: Union[HuberScale, float]
) -> np.ndarray:
    matrix = scatter.matrix if isinstance(scatter, ScatterEstimate) else np.asarray(scatter, dtype=float)
    value = theta.theta_hat if isinstance(theta, HuberScale) else float(theta)
    if value < 0:
        raise ValidationError(f"scale must be nonnegative, got {value}")
    return value * matrix


def scaled_covariance(
    X: np.ndarray,
    mu: np.ndarray,
    scatter: Union[ScatterEstimate, np.ndarray],
    v_s: Optional[np.ndarray] = None,
    h: Optional[float] = None,
    epsilon: float = 1.0,
    c: float = 1.0,
) -> ScaledCovariance:
    """
    Radii from v_s (the inverse of ``scatter`` when omitted), Huber scale
    with h = default_h(n, epsilon, c) unless given, rescaled scatter.
    """
    matrix = scatter.matrix if isinstance(scatter, ScatterEstimate) else np.asarray(scatter, dtype=float)
    if v_s is None:
        try:
            v_s = sla.inv(matrix)
        except (sla.LinAlgError, ValueError) as e:
            raise NumericError(f"cannot invert the scatter estimate: {e}") from e
    radii = mahalanobis_radii(X, mu, v_s)
    h = default_h(radii.shape[0], epsilon, c) if h is None else h
    fitted = huber_scale(radii, h)
    logger.debug("huber scale %.4g (h=%.3g, n=%d)", fitted.theta_hat, h, radii.shape[0])
    return ScaledCovariance(covariance_from_scatter(matrix, fitted), fitted)
