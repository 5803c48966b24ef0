"""riskcal: distribution-free risk calibration for pixel-wise defect maps.

Turns uncalibrated probability maps into prediction sets whose expected
false-negative or false-discovery rate on exchangeable test data is
bounded by a user-chosen risk level, and audits that guarantee by Monte
Carlo simulation.
"""

__version__ = "0.1.0"

from .calibration import (
    CalibrationInfeasible,
    RiskLevel,
    RiskProfile,
    calibrate,
    calibrate_oracle,
    crc_bound,
    empirical_risk,
)
from .evaluation import (
    AblationRow,
    GuaranteeReport,
    SweepRow,
    ablate_splits,
    mean_predset_size,
    pearson,
    sweep,
    test_risk,
    validate_guarantee,
)
from .grids import (
    CalibrationRecord,
    DefectMask,
    DimensionMismatchError,
    PredictionSet,
    ProbabilityMap,
    build_prediction_set,
    defect_coverage_ratio,
    intersect_count,
)
from .losses import (
    FDR,
    FDR_MONOTONE,
    FNR,
    LossCurve,
    LossKind,
    breakpoint_grid,
    default_grid,
    fdr_loss,
    fnr_loss,
    loss_curve,
    monotonize,
)
from .synthetic import GeneratorParams, generate_dataset, generate_sample

__all__ = [
    "__version__",
    "CalibrationInfeasible",
    "RiskLevel",
    "RiskProfile",
    "calibrate",
    "calibrate_oracle",
    "crc_bound",
    "empirical_risk",
    "AblationRow",
    "GuaranteeReport",
    "SweepRow",
    "ablate_splits",
    "mean_predset_size",
    "pearson",
    "sweep",
    "test_risk",
    "validate_guarantee",
    "CalibrationRecord",
    "DefectMask",
    "DimensionMismatchError",
    "PredictionSet",
    "ProbabilityMap",
    "build_prediction_set",
    "defect_coverage_ratio",
    "intersect_count",
    "FDR",
    "FDR_MONOTONE",
    "FNR",
    "LossCurve",
    "LossKind",
    "breakpoint_grid",
    "default_grid",
    "fdr_loss",
    "fnr_loss",
    "loss_curve",
    "monotonize",
    "GeneratorParams",
    "generate_dataset",
    "generate_sample",
]
