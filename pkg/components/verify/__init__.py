"""Verify component: independent gradient oracles and the equivalence suite"""

from .api import (
    RULES,
    Comparison,
    GradReport,
    InstanceResult,
    RuleSummary,
    assert_report,
    compare,
    equivalence_report,
    write_report,
)
from .config import VerifyConfig
from .oracles import blocked_analytic_grad, finite_diff, random_dense_instance

__all__ = [
    "RULES",
    "Comparison",
    "GradReport",
    "InstanceResult",
    "RuleSummary",
    "assert_report",
    "compare",
    "equivalence_report",
    "write_report",
    "VerifyConfig",
    "blocked_analytic_grad",
    "finite_diff",
    "random_dense_instance",
]
