import numpy as np

from estimators.errors import ValidationError
from .base_family import BaseTailFamily


class StudentT(BaseTailFamily):
    """
    Multivariate t with ``nu`` degrees of freedom and covariance equal to the
    target matrix: the Gaussian part is shrunk by (nu-2)/nu before dividing
    by sqrt(chi2_nu / nu).
    """

    name = "student_t"

    def __init__(self, nu: float):
        super().__init__(nu=float(nu))

    def validate(self) -> None:
        nu = self.params["nu"]
        if not np.isfinite(nu) or nu <= 2:
            raise ValidationError(f"StudentT needs nu > 2 for a finite covariance, got {nu}")

    @property
    def nu(self) -> float:
        return self.params["nu"]

    def radial_scales(self, rng: np.random.Generator, n: int) -> np.ndarray:
        w = rng.chisquare(df=self.nu, size=n)
        return np.sqrt((self.nu - 2.0) / self.nu) / np.sqrt(w / self.nu)
