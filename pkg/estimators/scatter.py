"""
Raw scatter estimators: sample covariance, spatial-sign covariance, the
Tyler plug-in built on a pilot precision matrix, and the regularized Tyler
fixed point applied to symmetrized data.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, NumericError, ValidationError

logger = logging.getLogger(__name__)

ROW_EXCLUSION_TOL = 1e-14
REG_TYLER_TOL = 1e-8
REG_TYLER_MAX_ITER = 200


class ScatterKind(str, Enum):
    SAMPLE = "Sample"
    SPATIAL_SIGN = "SpatialSign"
    TYLER_PLUGIN = "TylerPlugin"
    REG_TYLER = "RegTyler"


@dataclass
class ScatterEstimate:
    matrix: np.ndarray
    kind: ScatterKind
    center: Optional[np.ndarray] = None
    alpha: Optional[float] = None
    excluded: int = 0
    iterations: int = 1
    # matrix = scale_factor * (raw estimator output)
    scale_factor: float = 1.0
    residual_history: List[float] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def _as_data(X: np.ndarray, min_rows: int = 1) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValidationError(f"X must be an n x d matrix, got shape {X.shape}")
    if X.shape[0] < min_rows:
        raise ValidationError(f"need at least {min_rows} rows, got {X.shape[0]}")
    return X


def _to_trace_d(S: np.ndarray) -> tuple:
    d = S.shape[0]
    trace = float(np.trace(S))
    if not trace > 0:
        raise NumericError("cannot rescale a matrix with nonpositive trace to trace d")
    factor = d / trace
    return S * factor, factor


def _weighted_scatter(Z: np.ndarray, q: np.ndarray) -> np.ndarray:
    """(d/n) sum_i z_i z_i' / q_i, symmetrized."""
    n, d = Z.shape
    Zw = Z / np.sqrt(q)[:, None]
    S = (d / n) * (Zw.T @ Zw)
    return 0.5 * (S + S.T)


def _centered_rows(X: np.ndarray, mu: np.ndarray) -> tuple:
    """Centered rows with rows equal to mu (relative 1e-14) removed."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape[0] != X.shape[1]:
        raise ValidationError(f"location has length {mu.shape[0]}, expected {X.shape[1]}")
    Z = X - mu
    sq = np.einsum("ij,ij->i", Z, Z)
    scale = max(1.0, float(sq.max()))
    keep = sq > (ROW_EXCLUSION_TOL ** 2) * scale
    excluded = int((~keep).sum())
    if not keep.any():
        raise ValidationError("every row coincides with the location estimate")
    if excluded:
        logger.warning("%d row(s) coincide with the location estimate and were skipped", excluded)
    return Z[keep], excluded


def sample_covariance(X: np.ndarray, normalize_to_scatter: bool = False) -> ScatterEstimate:
    """Mean-centered covariance with divisor n; optionally rescaled to trace d."""
    X = _as_data(X, min_rows=2)
    mean = X.mean(axis=0)
    Z = X - mean
    S = (Z.T @ Z) / X.shape[0]
    S = 0.5 * (S + S.T)
    factor = 1.0
    if normalize_to_scatter:
        S, factor = _to_trace_d(S)
    return ScatterEstimate(S, ScatterKind.SAMPLE, center=mean, scale_factor=factor)


def spatial_sign_covariance(X: np.ndarray, mu: np.ndarray) -> ScatterEstimate:
    """(d/n) sum_i U(X_i - mu) U(X_i - mu)', trace d."""
    X = _as_data(X)
    Z, excluded = _centered_rows(X, mu)
    q = np.einsum("ij,ij->i", Z, Z)
    S, factor = _to_trace_d(_weighted_scatter(Z, q))
    return ScatterEstimate(
        S, ScatterKind.SPATIAL_SIGN, center=np.asarray(mu, dtype=float), excluded=excluded, scale_factor=factor
    )


def _plugin_pass(Z: np.ndarray, v: np.ndarray) -> np.ndarray:
    q = np.einsum("ij,ij->i", Z @ v, Z)
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise NumericError("pilot precision gives a nonpositive quadratic form; it is not positive definite")
    return _weighted_scatter(Z, q)


def _invert_spd(S: np.ndarray) -> np.ndarray:
    try:
        inv = sla.inv(S)
    except (sla.LinAlgError, ValueError) as e:
        raise NumericError(f"cannot invert scatter estimate: {e}") from e
    return 0.5 * (inv + inv.T)


def tyler_plugin(
    X: np.ndarray,
    mu: np.ndarray,
    v_init: np.ndarray,
    iterations: int = 1,
    refine: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> ScatterEstimate:
    """
    Naive Tyler plug-in (d/n) sum_i z_i z_i' / (z_i' V_S z_i), rescaled to trace d.

    With iterations > 1, each further pass uses the inverse of the previous
    estimate after it has gone through ``refine`` (for example a POET step);
    without ``refine`` the raw estimate is inverted.
    """
    X = _as_data(X)
    if iterations < 1:
        raise ValidationError(f"iterations must be >= 1, got {iterations}")
    v = np.asarray(v_init, dtype=float)
    d = X.shape[1]
    if v.shape != (d, d):
        raise ValidationError(f"v_init must be {d} x {d}, got {v.shape}")
    Z, excluded = _centered_rows(X, mu)

    S, factor = _to_trace_d(_plugin_pass(Z, v))
    for _ in range(1, iterations):
        pilot = refine(S) if refine is not None else S
        S, factor = _to_trace_d(_plugin_pass(Z, _invert_spd(pilot)))
    return ScatterEstimate(
        S,
        ScatterKind.TYLER_PLUGIN,
        center=np.asarray(mu, dtype=float),
        excluded=excluded,
        iterations=iterations,
        scale_factor=factor,
    )


def reg_tyler_map(X_sym: np.ndarray, sigma: np.ndarray, alpha: float) -> np.ndarray:
    """One application of the regularized Tyler map at sigma."""
    X_sym = _as_data(X_sym)
    sq = np.einsum("ij,ij->i", X_sym, X_sym)
    Z = X_sym[sq > 0]
    if Z.shape[0] == 0:
        raise ValidationError("symmetrized data has no nonzero rows")
    data_term = _plugin_pass(Z, _invert_spd(sigma))
    # _plugin_pass uses d / n_kept; the map averages over all rows
    data_term *= Z.shape[0] / X_sym.shape[0]
    d = X_sym.shape[1]
    return data_term / (1.0 + alpha) + (alpha / (1.0 + alpha)) * np.eye(d)


def reg_tyler(
    X_sym: np.ndarray,
    alpha: float,
    tol: float = REG_TYLER_TOL,
    max_iter: int = REG_TYLER_MAX_ITER,
) -> ScatterEstimate:
    """
    Fixed point of the regularized Tyler map started at I_d, stopped when the
    relative Frobenius change drops below tol, then rescaled to trace d.
    Rows must already be centered (see ``symmetrize``).
    """
    X_sym = _as_data(X_sym)
    if not alpha > 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    d = X_sym.shape[1]
    sigma = np.eye(d)
    history: List[float] = []
    for it in range(1, max_iter + 1):
        updated = reg_tyler_map(X_sym, sigma, alpha)
        change = float(np.linalg.norm(updated - sigma) / np.linalg.norm(sigma))
        sigma = updated
        history.append(change)
        if change < tol:
            S, factor = _to_trace_d(sigma)
            return ScatterEstimate(
                S,
                ScatterKind.REG_TYLER,
                center=np.zeros(d),
                alpha=alpha,
                iterations=it,
                scale_factor=factor,
                residual_history=history,
            )
    logger.warning("reg_tyler: no convergence after %d iterations (change %.3e)", max_iter, history[-1])
    raise ConvergenceError(
        f"regularized Tyler iteration did not converge in {max_iter} iterations",
        best=sigma,
        residual=history[-1],
    )


def symmetrize(X: np.ndarray) -> np.ndarray:
    """Pairwise differences of consecutive rows: X_1 - X_2, X_3 - X_4, ..."""
    X = _as_data(X, min_rows=2)
    k = X.shape[0] // 2
    return X[0: 2 * k: 2] - X[1: 2 * k: 2]


def regtyler_alpha(gamma: float, s_max: float) -> float:
    """max(0.1, 1.1 (gamma - 1 + s_max (1 + sqrt(gamma))^2))."""
    return max(0.1, 1.1 * (gamma - 1.0 + s_max * (1.0 + np.sqrt(gamma)) ** 2))


def regtyler_alpha_default(X_sym: np.ndarray, n: Optional[int] = None) -> float:
    """
    Default regularization with gamma = d / (2n), n the sample size before
    symmetrization (2 * rows of X_sym unless given), and s_max the spectral
    norm of the sample covariance of X_sym.
    """
    X_sym = _as_data(X_sym, min_rows=1)
    n = 2 * X_sym.shape[0] if n is None else n
    if n < 2:
        raise ValidationError(f"n must be >= 2, got {n}")
    gamma = X_sym.shape[1] / (2.0 * n)
    if X_sym.shape[0] < 2:
        s_max = 0.0
    else:
        s_max = float(sla.eigvalsh(sample_covariance(X_sym).matrix)[-1])
    return regtyler_alpha(gamma, max(s_max, 0.0))
