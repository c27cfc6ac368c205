"""Core data model: schemas, parameters and decision trees"""

from claimcart.core.params import GammaPriorPair, LatentState, LatentSummary, NodeParams
from claimcart.core.schema import CovariateSchema, Variable, VariableKind
from claimcart.core.tree import (
    ChangeRule,
    DecisionRule,
    Grow,
    Internal,
    Leaf,
    NodeSuffStats,
    Prune,
    SwapRules,
    Tree,
    apply_structural_edit,
    route,
)

__all__ = [
    "CovariateSchema",
    "Variable",
    "VariableKind",
    "NodeParams",
    "GammaPriorPair",
    "LatentState",
    "LatentSummary",
    "DecisionRule",
    "NodeSuffStats",
    "Leaf",
    "Internal",
    "Tree",
    "Grow",
    "Prune",
    "ChangeRule",
    "SwapRules",
    "apply_structural_edit",
    "route",
]
