"""
Matrix error metrics and the named scores reported by the simulation harness.
"""
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Iterable, Optional

import numpy as np
import scipy.linalg as sla

from estimators.errors import NumericError, ValidationError
from estimators.spectral import normalize_signs


def _as_matrix(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValidationError(f"expected a matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix has non-finite entries")
    return M


def max_norm(M) -> float:
    M = _as_matrix(M)
    return float(np.abs(M).max()) if M.size else 0.0


def frobenius(M) -> float:
    return float(np.linalg.norm(_as_matrix(M), "fro"))


def spectral(M) -> float:
    M = _as_matrix(M)
    if M.size == 0:
        return 0.0
    if M.shape[0] == M.shape[1] and np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(M).max())):
        return float(np.abs(sla.eigvalsh(0.5 * (M + M.T))).max())
    return float(sla.svdvals(M)[0])


def l1_op(M) -> float:
    """Largest absolute column sum."""
    M = _as_matrix(M)
    return float(np.abs(M).sum(axis=0).max()) if M.size else 0.0


def linf_op(M) -> float:
    """Largest absolute row sum."""
    M = _as_matrix(M)
    return float(np.abs(M).sum(axis=1).max()) if M.size else 0.0


def elementwise_l1(M) -> float:
    return float(np.abs(_as_matrix(M)).sum())


def inverse_sqrt(sigma: np.ndarray) -> np.ndarray:
    sigma = _as_matrix(sigma)
    values, vectors = sla.eigh(0.5 * (sigma + sigma.T))
    if values[0] <= 0:
        raise NumericError(f"matrix is not positive definite (smallest eigenvalue {values[0]:.3e})")
    return (vectors / np.sqrt(values)[None, :]) @ vectors.T


def rel_frobenius(M, sigma) -> float:
    """d^{-1/2} ||sigma^{-1/2} M sigma^{-1/2}||_F."""
    M = _as_matrix(M)
    root = inverse_sqrt(sigma)
    if root.shape != M.shape:
        raise ValidationError(f"shape mismatch: {M.shape} vs {root.shape}")
    return frobenius(root @ M @ root) / np.sqrt(M.shape[0])


def ratio_error(lambda_hat, lam) -> float:
    """max_j |lambda_hat_j / lambda_j - 1|."""
    lambda_hat = np.asarray(lambda_hat, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lambda_hat.shape != lam.shape:
        raise ValidationError(f"shape mismatch: {lambda_hat.shape} vs {lam.shape}")
    if np.any(lam == 0):
        raise ValidationError("true eigenvalues must be nonzero")
    if lam.size == 0:
        return 0.0
    return float(np.abs(lambda_hat / lam - 1.0).max())


def eigvec_error(gamma_hat, gamma) -> float:
    """sqrt(d) * entrywise max difference after sign normalization."""
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if gamma_hat.shape != gamma.shape or gamma.ndim != 2:
        raise ValidationError(f"shape mismatch: {gamma_hat.shape} vs {gamma.shape}")
    if gamma.size == 0:
        return 0.0
    diff = normalize_signs(gamma_hat) - normalize_signs(gamma)
    return float(np.sqrt(gamma.shape[0]) * np.abs(diff).max())


@dataclass
class ErrorReport:
    max_norm: Optional[float] = None
    frobenius: Optional[float] = None
    spectral: Optional[float] = None
    rel_frobenius: Optional[float] = None
    l1_op: Optional[float] = None
    linf_op: Optional[float] = None

    def to_dict(self) -> Dict[str, float]:
        return {k: v for k, v in asdict(self).items() if v is not None}


REPORT_NORMS = ("max_norm", "frobenius", "spectral", "rel_frobenius", "l1_op", "linf_op")


def error_report(M, sigma=None, metrics: Iterable[str] = REPORT_NORMS) -> ErrorReport:
    """Requested norms of M; rel_frobenius needs sigma and is skipped without it."""
    report = ErrorReport()
    plain = {"max_norm": max_norm, "frobenius": frobenius, "spectral": spectral, "l1_op": l1_op, "linf_op": linf_op}
    for name in metrics:
        if name == "rel_frobenius":
            if sigma is not None:
                report.rel_frobenius = rel_frobenius(M, sigma)
        elif name in plain:
            setattr(report, name, plain[name](M))
        else:
            raise ValidationError(f"Unknown norm {name!r}. Expected one of: {list(REPORT_NORMS)}")
    return report


# Named harness metrics: (estimate attribute, truth attribute, error function)
def _matrix_metric(fn: Callable) -> Callable[[np.ndarray, np.ndarray], float]:
    return lambda est, true: fn(est - true)


METRICS: Dict[str, tuple] = {
    # scatter
    "sigma0_max": ("sigma0_hat", "sigma0", _matrix_metric(max_norm)),
    "lambda_ratio": ("lambda_hat", "lambda_m", ratio_error),
    "gamma_max": ("gamma_hat", "gamma_m", eigvec_error),
    "sigma0_rel": ("sigma0_hat", "sigma0", lambda est, true: rel_frobenius(est - true, true)),
    "sigma0_fro": ("sigma0_hat", "sigma0", _matrix_metric(frobenius)),
    "sigma0_spectral": ("sigma0_hat", "sigma0", _matrix_metric(spectral)),
    "sigma0u_spectral": ("sigma0u_hat", "sigma0_u", _matrix_metric(spectral)),
    # covariance
    "cov_max": ("cov_hat", "cov_x", _matrix_metric(max_norm)),
    "cov_rel": ("cov_hat", "cov_x", lambda est, true: rel_frobenius(est - true, true)),
    "cov_spectral": ("cov_hat", "cov_x", _matrix_metric(spectral)),
    # precision
    "v_fro": ("v0_hat", "v0", _matrix_metric(frobenius)),
    "vu_fro": ("v0u_hat", "v0_u", _matrix_metric(frobenius)),
    "v_max": ("v0_hat", "v0", _matrix_metric(max_norm)),
    "vu_max": ("v0u_hat", "v0_u", _matrix_metric(max_norm)),
    "v_spectral": ("v0_hat", "v0", _matrix_metric(spectral)),
    "vu_spectral": ("v0u_hat", "v0_u", _matrix_metric(spectral)),
}

# plain norm names score the scatter estimate
METRIC_ALIASES = {
    "max_norm": "sigma0_max",
    "rel_frobenius": "sigma0_rel",
    "frobenius": "sigma0_fro",
    "spectral": "sigma0_spectral",
}


def check_metrics(names: Iterable[str]) -> list:
    names = list(names)
    unknown = [n for n in names if METRIC_ALIASES.get(n, n) not in METRICS]
    if unknown:
        raise ValidationError(f"Unknown metrics {unknown}. Expected any of: {sorted(METRICS) + sorted(METRIC_ALIASES)}")
    return names


def score(metric: str, fit: Any, truth: Any) -> Optional[float]:
    """
    Error of a pipeline fit against the ground truth, or None when the
    pipeline does not produce the quantity the metric needs.
    """
    key = METRIC_ALIASES.get(metric, metric)
    if key not in METRICS:
        raise ValidationError(f"Unknown metric {metric!r}")
    est_attr, true_attr, fn = METRICS[key]
    estimate = getattr(fit, est_attr, None)
    if estimate is None:
        return None
    return float(fn(estimate, getattr(truth, true_attr)))
