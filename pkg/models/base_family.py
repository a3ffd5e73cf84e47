from typing import Any, Dict

import numpy as np

from estimators.errors import ValidationError


class BaseTailFamily:
    """
    Shared machinery for the elliptical tail families.

    Every family draws rows as ``s_i * z_i`` where ``z_i`` is Gaussian with
    the target covariance and ``s_i`` is a per-row radial multiplier. The
    multiplier is common to all coordinates of a row, so factors and
    idiosyncratic errors drawn together share it (joint elliptical draw).
    """

    name = "base"

    def __init__(self, **params: Any):
        self.params = params
        self.validate()

    def validate(self) -> None:
        """Check family parameters; subclasses raise ValidationError."""

    @property
    def second_moment(self) -> float:
        """E(s^2): covariance of a draw divided by the target covariance."""
        return 1.0

    def radial_scales(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Length-n vector of radial multipliers."""
        raise NotImplementedError

    def draw(self, rng: np.random.Generator, chol: np.ndarray, n: int) -> np.ndarray:
        """
        Draws n rows with scatter ``chol @ chol.T``.

        The Gaussian part is generated first and the radial multipliers
        second, so a family's stream is reproducible from the generator state.
        """
        if n < 1:
            raise ValidationError(f"n must be >= 1, got {n}")
        z = rng.standard_normal((n, chol.shape[0])) @ chol.T
        return z * self.radial_scales(rng, n)[:, None]

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.name, **self.params}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other: object) -> bool:
        return type(self) is type(other) and self.params == other.params
