import numpy as np

from estimators.errors import ValidationError
from .base_family import BaseTailFamily


class MixtureNormal(BaseTailFamily):
    """(1-weight) N(0, S) + weight N(0, inflation * S)."""

    name = "mixture_normal"

    def __init__(self, weight: float = 0.2, inflation: float = 10.0):
        super().__init__(weight=float(weight), inflation=float(inflation))

    def validate(self) -> None:
        w, infl = self.params["weight"], self.params["inflation"]
        if not 0.0 < w < 1.0:
            raise ValidationError(f"mixture weight must lie in (0, 1), got {w}")
        if not infl > 0.0:
            raise ValidationError(f"mixture inflation must be positive, got {infl}")

    @property
    def weight(self) -> float:
        return self.params["weight"]

    @property
    def inflation(self) -> float:
        return self.params["inflation"]

    @property
    def second_moment(self) -> float:
        return 1.0 - self.weight + self.weight * self.inflation

    def radial_scales(self, rng: np.random.Generator, n: int) -> np.ndarray:
        inflated = rng.random(n) < self.weight
        return np.where(inflated, np.sqrt(self.inflation), 1.0)
