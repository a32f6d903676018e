"""High-dimensional fixed-effects regression and design builders."""

from .absorb import absorbed_dof, demean, fe_code_matrix, group_codes, singleton_mask
from .design import (
    Design,
    EventStudyDesign,
    RegressionSpec,
    build_did,
    build_event_study,
    event_term,
)
from .estimate import FitResult, diff_test, fit, fit_lpm, wald_test

__all__ = [
    "Design",
    "EventStudyDesign",
    "FitResult",
    "RegressionSpec",
    "absorbed_dof",
    "build_did",
    "build_event_study",
    "demean",
    "diff_test",
    "event_term",
    "fe_code_matrix",
    "fit",
    "fit_lpm",
    "group_codes",
    "singleton_mask",
    "wald_test",
]
