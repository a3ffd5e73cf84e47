import numpy as np

from .base_family import BaseTailFamily


class Gaussian(BaseTailFamily):
    name = "gaussian"

    def __init__(self):
        super().__init__()

    def radial_scales(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.ones(n)
