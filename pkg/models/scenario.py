"""ScenarioSpec: a serializable description of one data-generating process."""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from estimators.errors import ValidationError
from .base_family import BaseTailFamily
from .factor_model import (
    FactorModelSpec,
    GroundTruth,
    ar1_matrix,
    ar1_precision_design,
    build_loadings,
    ground_truth,
    normalization_constant,
)
from .gaussian import Gaussian
from .mixture_normal import MixtureNormal
from .student_t import StudentT

DEFAULT_LOADING_VARIANCES = [1.0, 0.75 ** 2, 0.5 ** 2]

TAIL_FAMILIES = {
    Gaussian.name: Gaussian,
    StudentT.name: StudentT,
    MixtureNormal.name: MixtureNormal,
}

# Named scenarios of the simulation study
PRESET_TAILS = {
    "I": {"family": "gaussian"},
    "II": {"family": "student_t", "nu": 4.0},
    "III": {"family": "student_t", "nu": 2.2},
    "IV": {"family": "mixture_normal", "weight": 0.2, "inflation": 10.0},
}


def tail_from_dict(cfg: Dict[str, Any]) -> BaseTailFamily:
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    if family not in TAIL_FAMILIES:
        raise ValidationError(
            f"Unknown tail family {family!r}. Expected one of: {sorted(TAIL_FAMILIES)}"
        )
    try:
        return TAIL_FAMILIES[family](**cfg)
    except TypeError as e:
        raise ValidationError(f"Bad parameters for tail family {family!r}: {e}") from e


def idiosyncratic_from_dict(d: int, cfg: Dict[str, Any]) -> np.ndarray:
    design = cfg.get("design", "ar1_cov")
    if design == "ar1_cov":
        return ar1_matrix(d, float(cfg.get("rho", 0.9)))
    if design == "ar1_precision":
        return ar1_precision_design(d, float(cfg.get("rho", 0.4)))
    if design == "identity":
        return np.eye(d)
    raise ValidationError(
        f"Unknown idiosyncratic design {design!r}. Expected ar1_cov, ar1_precision or identity"
    )


@dataclass
class ScenarioSpec:
    n: int
    d: int
    m: int = 3
    loading_variances: List[float] = field(default_factory=lambda: list(DEFAULT_LOADING_VARIANCES))
    idiosyncratic: Dict[str, Any] = field(default_factory=lambda: {"design": "ar1_cov", "rho": 0.9})
    tail: Dict[str, Any] = field(default_factory=lambda: {"family": "gaussian"})
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"scenario n must be >= 1, got {self.n}")
        # fail early on bad families
        tail_from_dict(self.tail)

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any]) -> "ScenarioSpec":
        known = {"n", "d", "m", "loading_variances", "idiosyncratic", "tail", "seed"}
        unknown = set(cfg) - known
        if unknown:
            raise ValidationError(f"Unknown scenario keys: {sorted(unknown)}")
        missing = {"n", "d"} - set(cfg)
        if missing:
            raise ValidationError(f"Missing scenario keys: {sorted(missing)}")
        cfg = dict(cfg)
        if "m" in cfg and "loading_variances" not in cfg:
            cfg["loading_variances"] = DEFAULT_LOADING_VARIANCES[: int(cfg["m"])]
        return cls(
            n=int(cfg["n"]),
            d=int(cfg["d"]),
            m=int(cfg.get("m", 3)),
            loading_variances=[float(s) for s in cfg.get("loading_variances", DEFAULT_LOADING_VARIANCES)],
            idiosyncratic=dict(cfg.get("idiosyncratic", {"design": "ar1_cov", "rho": 0.9})),
            tail=dict(cfg.get("tail", {"family": "gaussian"})),
            seed=int(cfg.get("seed", 0)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "loading_variances": list(self.loading_variances),
            "idiosyncratic": dict(self.idiosyncratic),
            "tail": dict(self.tail),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_dimension(self, d: int) -> "ScenarioSpec":
        return ScenarioSpec.from_dict({**self.to_dict(), "d": d})

    def tail_family(self) -> BaseTailFamily:
        return tail_from_dict(self.tail)

    def factor_model(self) -> FactorModelSpec:
        return FactorModelSpec(
            d=self.d,
            m=self.m,
            loading_variances=self.loading_variances,
            idiosyncratic_cov=idiosyncratic_from_dict(self.d, self.idiosyncratic),
            seed=self.seed,
        )

    def build(self):
        """(FactorModelSpec, tail family, loadings, ground truth) for this scenario."""
        spec = self.factor_model()
        tail = self.tail_family()
        B = build_loadings(spec)
        c = normalization_constant(B, spec.idiosyncratic_cov)
        truth = ground_truth(B, spec.idiosyncratic_cov, cov_scale=c * tail.second_moment)
        return spec, tail, B, truth


def scenario_preset(name: str, n: int = 100, d: int = 200, seed: int = 0, **overrides: Any) -> ScenarioSpec:
    """Scenario I-IV with the loading design of the simulation study."""
    if name not in PRESET_TAILS:
        raise ValidationError(f"Unknown scenario {name!r}. Expected one of: {sorted(PRESET_TAILS)}")
    cfg = {"n": n, "d": d, "seed": seed, "tail": dict(PRESET_TAILS[name]), **overrides}
    return ScenarioSpec.from_dict(cfg)


def load_scenario(path: str) -> ScenarioSpec:
    """Read a ScenarioSpec from a JSON or YAML document (bare or under a 'scenario' key)."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    doc = yaml.safe_load(p.read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ValidationError(f"Scenario file {path} must hold a mapping")
    return ScenarioSpec.from_dict(doc.get("scenario", doc))
