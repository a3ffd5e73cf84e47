"""
Symmetric eigendecomposition helpers, the rank-m spectral split used by
POET, and the eigenvalue-ratio (ER) / growth-ratio (GR) factor counts.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from .errors import ValidationError

SYMMETRY_TOL = 1e-10
SIGN_ZERO_TOL = 1e-12
EIGEN_FLOOR_RATIO = 1e-12
DEFAULT_MAX_FACTORS = 8


class FactorCountMethod(str, Enum):
    ER = "ER"
    GR = "GR"


@dataclass
class SpectralSplit:
    lambda_m: np.ndarray
    gamma_m: np.ndarray
    residual: np.ndarray

    @property
    def m(self) -> int:
        return self.lambda_m.shape[0]

    def low_rank(self) -> np.ndarray:
        return (self.gamma_m * self.lambda_m[None, :]) @ self.gamma_m.T


@dataclass
class FactorCountResult:
    m_hat: int
    criterion_values: np.ndarray
    method: FactorCountMethod
    M: int


def check_symmetric(S: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.abs(S).max())) if S.size else 1.0
    if S.size and np.abs(S - S.T).max() > tol * scale:
        raise ValidationError("matrix is not symmetric")
    return S


def normalize_signs(vectors: np.ndarray, zero_tol: float = SIGN_ZERO_TOL) -> np.ndarray:
    """Flip columns so the first entry with |x| > zero_tol is positive."""
    vectors = np.array(vectors, dtype=float, copy=True)
    for j in range(vectors.shape[1]):
        nonzero = np.flatnonzero(np.abs(vectors[:, j]) > zero_tol)
        if nonzero.size and vectors[nonzero[0], j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def eigendecompose(S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and sign-normalized orthonormal eigenvectors."""
    S = check_symmetric(S)
    values, vectors = sla.eigh(0.5 * (S + S.T))
    return values[::-1].copy(), normalize_signs(vectors[:, ::-1])


def split(S: np.ndarray, m: int) -> SpectralSplit:
    """S = Gamma_m Lambda_m Gamma_m' + residual, with the m leading eigenpairs."""
    S = check_symmetric(S)
    d = S.shape[0]
    if not 0 <= m <= d:
        raise ValidationError(f"need 0 <= m <= d, got m={m}, d={d}")
    if m == 0:
        return SpectralSplit(np.zeros(0), np.zeros((d, 0)), S.copy())
    values, vectors = sla.eigh(0.5 * (S + S.T), subset_by_index=[d - m, d - 1])
    lambda_m = values[::-1].copy()
    gamma_m = normalize_signs(vectors[:, ::-1])
    residual = S - (gamma_m * lambda_m[None, :]) @ gamma_m.T
    return SpectralSplit(lambda_m, gamma_m, residual)


def estimate_num_factors(
    eigs: Sequence[float],
    M: int = DEFAULT_MAX_FACTORS,
    method: FactorCountMethod = FactorCountMethod.GR,
    n: int = None,
    d: int = None,
) -> FactorCountResult:
    """
    ER: argmax_{j<=M} lambda_j / lambda_{j+1}.
    GR: argmax_{j<=M} ln(1 + lambda_j / V_{j-1}) / ln(1 + lambda_{j+1} / V_j),
    V_j = sum_{l=j+1}^{min(n,d)-1} lambda_l.

    Eigenvalues below 1e-12 * lambda_1 (and empty tail sums) are floored
    there. Ties go to the smallest j.
    """
    method = FactorCountMethod(method)
    lam = np.asarray(eigs, dtype=float)
    if M < 1:
        raise ValidationError(f"M must be >= 1, got {M}")
    if lam.ndim != 1 or lam.shape[0] < M + 1:
        raise ValidationError(f"need at least M+1={M + 1} eigenvalues, got {lam.shape[0]}")
    if np.any(np.diff(lam) > 1e-12 * max(1.0, abs(lam[0]))):
        raise ValidationError("eigenvalues must be in descending order")
    if not lam[0] > 0:
        raise ValidationError("the leading eigenvalue must be positive")
    floor = EIGEN_FLOOR_RATIO * lam[0]
    lam = np.maximum(lam, floor)

    if method is FactorCountMethod.ER:
        values = lam[:M] / lam[1: M + 1]
    else:
        if n is None or d is None:
            raise ValidationError("GR needs the sample size n and dimension d")
        K = min(n, d) - 1
        if K < 1:
            raise ValidationError(f"GR needs min(n, d) >= 2, got n={n}, d={d}")
        if lam.shape[0] < K:
            raise ValidationError(f"GR needs min(n, d)-1={K} eigenvalues, got {lam.shape[0]}")
        head = lam[:K]
        # V[j] = sum_{l=j+1}^{K} lambda_l for j = 0..M (1-based l)
        tail_sums = np.concatenate([np.cumsum(head[::-1])[::-1], [0.0]])
        V = np.maximum(np.array([tail_sums[j] if j < tail_sums.shape[0] else 0.0 for j in range(M + 1)]), floor)
        j = np.arange(1, M + 1)
        values = np.log1p(lam[j - 1] / V[j - 1]) / np.log1p(lam[j] / V[j])

    m_hat = int(np.argmax(values)) + 1
    return FactorCountResult(m_hat=m_hat, criterion_values=values, method=method, M=M)
