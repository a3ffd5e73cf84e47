from .errors import ConvergenceError, EstimationError, InfeasibleError, NumericError, ValidationError
from .location import LocationEstimate, spatial_median, spatial_median_objective
from .poet import (
    PoetEstimate,
    RuleKind,
    ThresholdRule,
    ThresholdSelection,
    poet,
    repair_pd,
    select_threshold_constant,
    threshold_level,
    threshold_value,
)
from .precision import (
    GlassoResult,
    PrecisionEstimate,
    PrecisionMethod,
    clime,
    clime_columns,
    estimate_precision,
    glasso,
    glasso_kkt_residual,
    glasso_objective,
    glasso_solve,
    symmetrize_smaller,
    woodbury_correct,
)
from .scale import (
    HuberScale,
    ScaledCovariance,
    covariance_from_scatter,
    default_h,
    huber_scale,
    mahalanobis_radii,
    scaled_covariance,
)
from .scatter import (
    ScatterEstimate,
    ScatterKind,
    reg_tyler,
    reg_tyler_map,
    regtyler_alpha,
    regtyler_alpha_default,
    sample_covariance,
    spatial_sign_covariance,
    symmetrize,
    tyler_plugin,
)
from .spectral import (
    FactorCountMethod,
    FactorCountResult,
    SpectralSplit,
    check_symmetric,
    eigendecompose,
    estimate_num_factors,
    normalize_signs,
    split,
)
