"""Spatial median via the modified Weiszfeld iteration."""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ConvergenceError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
COINCIDE_TOL = 1e-12


@dataclass
class LocationEstimate:
    mu_hat: np.ndarray
    iterations: int
    final_step_norm: float
    objective_history: List[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_history[-1]


def spatial_median_objective(X: np.ndarray, mu: np.ndarray) -> float:
    """Sum of Euclidean distances from mu to the rows of X."""
    return float(np.linalg.norm(np.asarray(X) - mu, axis=1).sum())


def spatial_median(X: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> LocationEstimate:
    """
    argmin_mu sum_i ||X_i - mu||, starting from the coordinatewise median.

    When the iterate sits on a data row the plain Weiszfeld step is
    undefined; the modified step (Vardi and Zhang) mixes the Weiszfeld
    point with the current iterate and stops once the subgradient certifies
    that the data row is the minimizer. Iteration stops when the step is
    below tol relative to max(1, ||mu||). With n = 2 any point of the
    segment is a minimizer; the midpoint (the starting point) is returned.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValidationError(f"X must be a non-empty n x d matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("X contains non-finite values")

    mu = np.median(X, axis=0)
    history = [spatial_median_objective(X, mu)]
    if X.shape[0] == 1:
        return LocationEstimate(mu, 0, 0.0, history)

    step = np.inf
    for it in range(1, max_iter + 1):
        diff = X - mu
        dist = np.linalg.norm(diff, axis=1)
        scale = max(1.0, float(dist.max()))
        coincide = dist <= COINCIDE_TOL * scale
        far = ~coincide
        if not far.any():
            return LocationEstimate(mu, it - 1, 0.0, history)

        w = 1.0 / dist[far]
        weiszfeld = (w[:, None] * X[far]).sum(axis=0) / w.sum()
        eta = int(coincide.sum())
        if eta == 0:
            candidate = weiszfeld
        else:
            r = float(np.linalg.norm((w[:, None] * diff[far]).sum(axis=0)))
            if r <= eta:
                # the data row under mu already satisfies the optimality condition
                return LocationEstimate(mu, it, 0.0, history)
            gamma = eta / r
            candidate = (1.0 - gamma) * weiszfeld + gamma * mu

        step = float(np.linalg.norm(candidate - mu)) / max(1.0, float(np.linalg.norm(mu)))
        objective = spatial_median_objective(X, candidate)
        if objective > history[-1] * (1.0 + 1e-13):
            # round-off floor reached; the previous iterate is the better one
            logger.debug("spatial_median: objective stalled at iteration %d (step %.3e)", it, step)
            return LocationEstimate(mu, it, step, history)

        mu = candidate
        history.append(objective)
        if step <= tol:
            return LocationEstimate(mu, it, step, history)

    logger.warning("spatial_median: no convergence after %d iterations (step %.3e)", max_iter, step)
    raise ConvergenceError(
        f"spatial median did not converge in {max_iter} iterations (relative step {step:.3e})",
        best=LocationEstimate(mu, max_iter, step, history),
        residual=step,
    )
