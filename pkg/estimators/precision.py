"""
Precision estimation for the idiosyncratic part (CLIME and graphical
lasso) and the low-rank Woodbury correction that turns it into an
estimate of the full inverse scatter matrix.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .errors import ConvergenceError, InfeasibleError, NumericError, ValidationError
from .poet import DEFAULT_PD_FLOOR_RATIO, PoetEstimate, repair_pd
from .spectral import check_symmetric

logger = logging.getLogger(__name__)

CLIME_TOL = 1e-9
GLASSO_TOL = 1e-6
GLASSO_MAX_ITER = 500
GLASSO_INNER_MAX_SWEEPS = 1000
INDEFINITE_TOL = 1e-8


class PrecisionMethod(str, Enum):
    CLIME = "CLIME"
    GLASSO = "GLASSO"


@dataclass
class GlassoResult:
    precision: np.ndarray
    objective_history: List[float]
    iterations: int
    kkt_residual: float


@dataclass
class PrecisionEstimate:
    v0: np.ndarray
    v0_u: np.ndarray
    tau: float
    method: PrecisionMethod
    iterations: int = 0
    kkt_residual: Optional[float] = None
    objective_history: List[float] = field(default_factory=list)


# CLIME

def _clime_column(sigma: np.ndarray, tau: float, j: int) -> np.ndarray:
    # min 1'(v+ + v-)  s.t.  |sigma (v+ - v-) - e_j| <= tau,  v+, v- >= 0
    d = sigma.shape[0]
    e = np.zeros(d)
    e[j] = 1.0
    A_ub = np.block([[sigma, -sigma], [-sigma, sigma]])
    b_ub = np.concatenate([tau + e, tau - e])
    result = linprog(
        np.ones(2 * d),
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": CLIME_TOL, "dual_feasibility_tolerance": CLIME_TOL},
    )
    if result.status == 2:
        raise InfeasibleError(f"CLIME column {j} is infeasible at tau={tau:.4g}", column=j)
    if result.status == 1:
        raise ConvergenceError(f"CLIME column {j} hit the solver iteration limit", best=result.x)
    if not result.success:
        raise NumericError(f"CLIME column {j} failed: {result.message}")
    return result.x[:d] - result.x[d:]


def clime_columns(sigma_u: np.ndarray, tau: float, threads: int = 1) -> np.ndarray:
    """Unsymmetrized CLIME solution, one linear program per column."""
    sigma_u = check_symmetric(sigma_u)
    if not tau > 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    d = sigma_u.shape[0]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            columns = list(pool.map(lambda j: _clime_column(sigma_u, tau, j), range(d)))
    else:
        columns = [_clime_column(sigma_u, tau, j) for j in range(d)]
    return np.column_stack(columns)


def symmetrize_smaller(V1: np.ndarray) -> np.ndarray:
    """Keep whichever of V1_ij, V1_ji is smaller in magnitude (V1_ij on ties)."""
    V1 = np.asarray(V1, dtype=float)
    smaller = np.where(np.abs(V1) <= np.abs(V1.T), V1, V1.T)
    return np.triu(smaller) + np.triu(smaller, 1).T


def clime(sigma_u: np.ndarray, tau: float, threads: int = 1) -> np.ndarray:
    return symmetrize_smaller(clime_columns(sigma_u, tau, threads=threads))


# graphical lasso

def glasso_objective(S: np.ndarray, V: np.ndarray, tau: float) -> float:
    """tr(S V) - log det V + tau ||V||_{1,1}, inf when V is not PD."""
    sign, logdet = np.linalg.slogdet(V)
    if sign <= 0:
        return np.inf
    return float(np.sum(S * V) - logdet + tau * np.abs(V).sum())


def glasso_kkt_residual(S: np.ndarray, V: np.ndarray, tau: float, W: Optional[np.ndarray] = None) -> float:
    """
    Max-norm distance of S - V^{-1} from -tau * (subdifferential of ||V||_{1,1}).
    Exact zeros of V may take any subgradient in [-1, 1].
    """
    if W is None:
        try:
            W = sla.inv(V)
        except (sla.LinAlgError, ValueError) as e:
            raise NumericError(f"precision estimate is singular: {e}") from e
    grad = S - W
    nonzero = V != 0
    residual = np.where(nonzero, np.abs(grad + tau * np.sign(V)), np.maximum(np.abs(grad) - tau, 0.0))
    return float(residual.max())


def _lasso_cd(G: np.ndarray, b: np.ndarray, tau: float, alpha: np.ndarray, tol: float) -> np.ndarray:
    """Coordinate descent for min_a 0.5 a'Ga + b'a + tau ||a||_1, warm started at alpha."""
    grad = G @ alpha
    for _ in range(GLASSO_INNER_MAX_SWEEPS):
        biggest = 0.0
        for k in range(b.shape[0]):
            old = alpha[k]
            z = grad[k] - G[k, k] * old + b[k]
            new = -np.sign(z) * max(abs(z) - tau, 0.0) / G[k, k]
            if new != old:
                grad += G[:, k] * (new - old)
                alpha[k] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return alpha


def glasso_solve(
    sigma_u: np.ndarray, tau: float, tol: float = GLASSO_TOL, max_iter: int = GLASSO_MAX_ITER
) -> GlassoResult:
    """
    Penalized log-determinant fit with every entry (diagonal included)
    under the l1 penalty.

    Block coordinate descent on the precision matrix itself: for column j
    the off-diagonal block solves a lasso with Gram matrix
    (s_jj + tau) * inv(V_{-j,-j}) and the diagonal entry follows in closed
    form, so every block step is an exact minimization and the objective
    never increases. Sweeps stop once the KKT residual is below tol.
    """
    S = check_symmetric(sigma_u)
    if not tau > 0:
        raise ValidationError(f"tau must be positive, got {tau}")
    min_eig = float(sla.eigvalsh(S)[0])
    if min_eig < -INDEFINITE_TOL:
        raise NumericError(
            f"input has eigenvalue {min_eig:.3e} < 0; apply repair_pd before the graphical lasso"
        )
    d = S.shape[0]
    w_diag = np.diag(S) + tau
    if np.any(w_diag <= 0):
        raise NumericError("diagonal of the input plus tau must be positive")

    V = np.diag(1.0 / w_diag)
    W = np.diag(w_diag)
    history = [glasso_objective(S, V, tau)]
    inner_tol = tol * 1e-2
    kkt = glasso_kkt_residual(S, V, tau, W=W)
    if kkt <= tol:
        return GlassoResult(V, history, 0, kkt)

    for sweep in range(1, max_iter + 1):
        for j in range(d):
            rest = np.arange(d) != j
            # inverse of V_{-j,-j} from the current W = V^{-1}
            U = W[np.ix_(rest, rest)] - np.outer(W[rest, j], W[rest, j]) / W[j, j]
            U = 0.5 * (U + U.T)
            alpha = _lasso_cd(w_diag[j] * U, S[rest, j], tau, V[rest, j].copy(), inner_tol)
            Ua = U @ alpha
            V[rest, j] = alpha
            V[j, rest] = alpha
            V[j, j] = 1.0 / w_diag[j] + alpha @ Ua
            W[np.ix_(rest, rest)] = U + w_diag[j] * np.outer(Ua, Ua)
            W[rest, j] = -w_diag[j] * Ua
            W[j, rest] = -w_diag[j] * Ua
            W[j, j] = w_diag[j]

        if not np.all(np.isfinite(V)):
            raise NumericError("graphical lasso produced non-finite entries")
        history.append(glasso_objective(S, V, tau))
        kkt = glasso_kkt_residual(S, V, tau)
        if kkt <= tol:
            return GlassoResult(V, history, sweep, kkt)

    logger.warning("glasso: no convergence after %d sweeps (KKT residual %.3e)", max_iter, kkt)
    raise ConvergenceError(
        f"graphical lasso did not converge in {max_iter} sweeps (KKT residual {kkt:.3e})",
        best=GlassoResult(V, history, max_iter, kkt),
        residual=kkt,
    )


def glasso(sigma_u: np.ndarray, tau: float, tol: float = GLASSO_TOL, max_iter: int = GLASSO_MAX_ITER) -> np.ndarray:
    return glasso_solve(sigma_u, tau, tol=tol, max_iter=max_iter).precision


# low-rank correction

def woodbury_correct(v_u: np.ndarray, gamma_m: np.ndarray, lambda_m: np.ndarray) -> np.ndarray:
    """v_u - v_u G (inv(L) + G' v_u G)^{-1} G' v_u."""
    v_u = np.asarray(v_u, dtype=float)
    gamma_m = np.asarray(gamma_m, dtype=float).reshape(v_u.shape[0], -1)
    lambda_m = np.asarray(lambda_m, dtype=float).reshape(-1)
    if gamma_m.shape[1] != lambda_m.shape[0]:
        raise ValidationError(f"{gamma_m.shape[1]} eigenvectors but {lambda_m.shape[0]} eigenvalues")
    if lambda_m.shape[0] == 0:
        return v_u.copy()
    if np.any(lambda_m <= 0):
        raise ValidationError("eigenvalues of the low-rank part must be positive")

    vg = v_u @ gamma_m
    inner = np.diag(1.0 / lambda_m) + gamma_m.T @ vg
    try:
        correction = sla.solve(inner, vg.T, assume_a="sym")
    except (sla.LinAlgError, ValueError) as e:
        raise NumericError(f"Woodbury inner matrix is singular: {e}") from e
    out = v_u - vg @ correction
    return 0.5 * (out + out.T)


def estimate_precision(
    poet_estimate: PoetEstimate,
    method: PrecisionMethod,
    tau: float,
    pd_floor_ratio: float = DEFAULT_PD_FLOOR_RATIO,
    threads: int = 1,
) -> PrecisionEstimate:
    """Repair the thresholded residual, estimate its inverse, add back the factor part."""
    method = PrecisionMethod(method)
    sigma_u = repair_pd(poet_estimate.sigma_u_tau, floor_ratio=pd_floor_ratio)
    parts = poet_estimate.split

    if method is PrecisionMethod.CLIME:
        v_u = clime(sigma_u, tau, threads=threads)
        estimate = PrecisionEstimate(woodbury_correct(v_u, parts.gamma_m, parts.lambda_m), v_u, tau, method)
    else:
        fitted = glasso_solve(sigma_u, tau)
        estimate = PrecisionEstimate(
            woodbury_correct(fitted.precision, parts.gamma_m, parts.lambda_m),
            fitted.precision,
            tau,
            method,
            iterations=fitted.iterations,
            kkt_residual=fitted.kkt_residual,
            objective_history=fitted.objective_history,
        )
    logger.debug("%s precision estimate at tau=%.4g (d=%d, m=%d)", method.value, tau, sigma_u.shape[0], parts.m)
    return estimate
