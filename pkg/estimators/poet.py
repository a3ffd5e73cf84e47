"""
Principal orthogonal complement thresholding.

The scatter estimate is split into its m leading eigenpairs and a residual;
off-diagonal residual entries are passed through an adaptive thresholding
rule and the two parts are added back together.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
from sklearn.model_selection import KFold

from .errors import NumericError, ValidationError
from .scatter import ScatterEstimate
from .spectral import SpectralSplit, check_symmetric, split

logger = logging.getLogger(__name__)

DEFAULT_C = 0.5
DEFAULT_PD_FLOOR_RATIO = 1e-4
DEFAULT_C_GRID = tuple(np.round(np.linspace(0.1, 2.0, 20), 10))


class RuleKind(str, Enum):
    HARD = "Hard"
    SOFT = "Soft"
    SCAD = "SCAD"
    ADAPTIVE_LASSO = "AdaptiveLasso"


@dataclass(frozen=True)
class ThresholdRule:
    kind: RuleKind = RuleKind.SOFT
    a: float = 3.7
    eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if self.kind is RuleKind.SCAD and not self.a > 2:
            raise ValidationError(f"SCAD needs a > 2, got {self.a}")
        if self.kind is RuleKind.ADAPTIVE_LASSO and not self.eta >= 1:
            raise ValidationError(f"adaptive lasso needs eta >= 1, got {self.eta}")

    @classmethod
    def from_value(cls, value: Union["ThresholdRule", str, dict, None]) -> "ThresholdRule":
        if value is None:
            return cls()
        if isinstance(value, ThresholdRule):
            return value
        if isinstance(value, str):
            return cls(RuleKind(value))
        if isinstance(value, dict):
            return cls(**value)
        raise ValidationError(f"cannot build a threshold rule from {value!r}")

    def apply(self, x, tau: float):
        """Vectorized s(x; tau)."""
        if tau < 0:
            raise ValidationError(f"tau must be nonnegative, got {tau}")
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        sign = np.sign(x)

        if self.kind is RuleKind.HARD:
            # strict so that s(x) = 0 whenever |x| <= tau
            return np.where(ax > tau, x, 0.0)
        if self.kind is RuleKind.SOFT:
            return sign * np.maximum(ax - tau, 0.0)
        if self.kind is RuleKind.SCAD:
            a = self.a
            return np.select(
                [ax <= tau, ax <= 2 * tau, ax <= a * tau],
                [0.0, sign * (ax - tau), ((a - 1) * x - sign * a * tau) / (a - 2)],
                default=x,
            )
        # adaptive lasso: sign(x) (|x| - tau^(eta+1) |x|^(-eta))_+
        safe = np.where(ax > 0, ax, 1.0)
        shrink = tau ** (self.eta + 1) / safe ** self.eta
        return np.where(ax > tau, sign * np.maximum(ax - shrink, 0.0), 0.0)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "a": self.a, "eta": self.eta}


def threshold_value(x: float, tau: float, rule: ThresholdRule) -> float:
    return float(rule.apply(x, tau))


@dataclass
class PoetEstimate:
    sigma_tau: np.ndarray
    sigma_u_tau: np.ndarray
    split: SpectralSplit
    threshold_level: float
    rule: ThresholdRule
    repaired: bool = False


def threshold_level(n: int, d: int, C: float = DEFAULT_C) -> float:
    """C * (sqrt(log d / n) + sqrt(log n / n))."""
    if n < 2 or d < 2:
        raise ValidationError(f"threshold level needs n >= 2 and d >= 2, got n={n}, d={d}")
    if C < 0:
        raise ValidationError(f"C must be nonnegative, got {C}")
    return C * (np.sqrt(np.log(d) / n) + np.sqrt(np.log(n) / n))


def repair_pd(M: np.ndarray, floor: Optional[float] = None, floor_ratio: float = DEFAULT_PD_FLOOR_RATIO) -> np.ndarray:
    """
    Clip the eigenvalues of a symmetric matrix from below.

    The floor defaults to floor_ratio * trace(M) / d.
    """
    M = check_symmetric(M)
    d = M.shape[0]
    if floor is None:
        mean_eig = float(np.trace(M)) / d
        if not mean_eig > 0:
            raise NumericError("cannot derive an eigenvalue floor from a matrix with nonpositive trace")
        floor = floor_ratio * mean_eig
    values, vectors = sla.eigh(0.5 * (M + M.T))
    if values[0] >= floor:
        return M.copy()
    clipped = np.maximum(values, floor)
    out = (vectors * clipped[None, :]) @ vectors.T
    return 0.5 * (out + out.T)


def _matrix_of(S: Union[ScatterEstimate, np.ndarray]) -> np.ndarray:
    if isinstance(S, ScatterEstimate):
        return S.matrix
    return np.asarray(S, dtype=float)


def poet(
    S: Union[ScatterEstimate, np.ndarray],
    m: int,
    tau: float,
    rule: Optional[ThresholdRule] = None,
    pd_repair: bool = False,
    pd_floor_ratio: float = DEFAULT_PD_FLOOR_RATIO,
) -> PoetEstimate:
    """
    Rank-m split of S, rule applied to the off-diagonal residual entries at
    level tau, reassembly. With pd_repair the thresholded residual (not the
    reassembled matrix) has its eigenvalues clipped at
    pd_floor_ratio * trace / d before reassembly.
    """
    rule = ThresholdRule.from_value(rule)
    if tau < 0:
        raise ValidationError(f"tau must be nonnegative, got {tau}")
    parts = split(_matrix_of(S), m)
    residual = parts.residual

    sigma_u_tau = _threshold_residual(residual, tau, rule)

    repaired = False
    if pd_repair:
        fixed = repair_pd(sigma_u_tau, floor_ratio=pd_floor_ratio)
        repaired = not np.array_equal(fixed, sigma_u_tau)
        if repaired:
            logger.debug("poet: residual eigenvalues clipped (floor ratio %.1e)", pd_floor_ratio)
        sigma_u_tau = fixed

    sigma_tau = parts.low_rank() + sigma_u_tau
    return PoetEstimate(sigma_tau, sigma_u_tau, parts, float(tau), rule, repaired)


@dataclass
class ThresholdSelection:
    C: float
    grid: np.ndarray
    losses: np.ndarray


def select_threshold_constant(
    X: np.ndarray,
    fit: Callable[[np.ndarray], Union[ScatterEstimate, np.ndarray]],
    m: int,
    rule: Optional[ThresholdRule] = None,
    grid: Sequence[float] = DEFAULT_C_GRID,
    folds: int = 5,
    seed: int = 0,
) -> ThresholdSelection:
    """
    Cross-validate C: for every fold the POET estimate of the training part
    is compared with the raw scatter of the held-out part, and the constant
    with the smallest mean squared Frobenius distance wins (ties go to the
    smaller C).
    """
    X = np.asarray(X, dtype=float)
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0 or np.any(grid < 0):
        raise ValidationError("the C grid must be a non-empty list of nonnegative values")
    if folds < 2 or X.shape[0] < 2 * folds:
        raise ValidationError(f"need folds >= 2 and at least {2 * folds} rows, got folds={folds}, n={X.shape[0]}")
    rule = ThresholdRule.from_value(rule)
    d = X.shape[1]

    losses = np.zeros(grid.shape[0])
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    for train, test in splitter.split(X):
        S_train = _matrix_of(fit(X[train]))
        S_test = _matrix_of(fit(X[test]))
        parts = split(S_train, m)
        for k, C in enumerate(grid):
            tau = threshold_level(len(train), d, C)
            est = _reassemble(parts, tau, rule)
            losses[k] += np.linalg.norm(est - S_test, "fro") ** 2
    losses /= folds
    best = int(np.argmin(losses))
    logger.info("threshold constant selected: C=%.2f (cv loss %.4g)", grid[best], losses[best])
    return ThresholdSelection(float(grid[best]), grid, losses)


def _threshold_residual(residual: np.ndarray, tau: float, rule: ThresholdRule) -> np.ndarray:
    out = rule.apply(residual, tau)
    np.fill_diagonal(out, np.diag(residual))
    return 0.5 * (out + out.T)


def _reassemble(parts: SpectralSplit, tau: float, rule: ThresholdRule) -> np.ndarray:
    return parts.low_rank() + _threshold_residual(parts.residual, tau, rule)
