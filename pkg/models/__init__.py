"""Elliptical factor models used to generate synthetic data."""
from .base_family import BaseTailFamily
from .factor_model import (
    FactorModelSpec,
    GroundTruth,
    ar1_matrix,
    ar1_precision_design,
    build_loadings,
    ground_truth,
    normalization_constant,
    sample,
)
from .gaussian import Gaussian
from .mixture_normal import MixtureNormal
from .scenario import ScenarioSpec, load_scenario, scenario_preset, tail_from_dict
from .student_t import StudentT

__all__ = [
    'BaseTailFamily', 'Gaussian', 'StudentT', 'MixtureNormal',
    'FactorModelSpec', 'GroundTruth', 'ar1_matrix', 'ar1_precision_design',
    'build_loadings', 'ground_truth', 'normalization_constant', 'sample',
    'ScenarioSpec', 'load_scenario', 'scenario_preset', 'tail_from_dict',
]
