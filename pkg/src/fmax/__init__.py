"""Exact expected-F-measure maximization for multi-label prediction.

The package computes Bayes-optimal predictions under the F-measure
from the m x m statistic p(y_i = 1, s_y = s), either for the full
label set or factorized over conditionally independent label blocks,
and ships the estimation, discovery, synthesis, and experiment pieces
needed to study both variants end to end.
"""

from ._kernels import BACKEND
from .core import (
    build_w,
    compute_delta,
    f_measure,
    f_measure_rows,
    gfm,
    gfm_from_p_only,
    p_matrix_from_json,
    p_matrix_to_json,
    validate_p_matrix,
)
from .factor import (
    FactorStats,
    LabelPartition,
    f_gfm,
    f_gfm_batch,
    merge,
    parameter_count,
    recover_d,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FactorStats",
    "LabelPartition",
    "build_w",
    "compute_delta",
    "f_gfm",
    "f_gfm_batch",
    "f_measure",
    "f_measure_rows",
    "gfm",
    "gfm_from_p_only",
    "merge",
    "p_matrix_from_json",
    "p_matrix_to_json",
    "parameter_count",
    "recover_d",
    "validate_p_matrix",
    "__version__",
]
