"""Test-set metrics and the stability harness"""

from claimcart.evaluation.metrics import (
    EvalReport,
    discrepancy,
    evaluate,
    evaluate_many,
    leaf_table,
    lift,
    lift_common_basis,
    nll,
    report_frame,
    rss_individual,
    rss_portfolio,
)
from claimcart.evaluation.stability import stability_assess, stability_predictions

__all__ = [
    "EvalReport",
    "rss_individual",
    "rss_portfolio",
    "nll",
    "discrepancy",
    "lift",
    "lift_common_basis",
    "leaf_table",
    "evaluate",
    "evaluate_many",
    "report_frame",
    "stability_assess",
    "stability_predictions",
]
