"""
claimcart - Bayesian CART for insurance claims frequency
"""

__version__ = "0.1.0"

# Core data model
from claimcart.core.params import GammaPriorPair, NodeParams
from claimcart.core.schema import CovariateSchema, Variable, VariableKind
from claimcart.core.tree import DecisionRule, Tree, route

# Data
from claimcart.data.dataset import Dataset, load_csv, save_csv, stratified_split
from claimcart.data.simulate import ScenarioConfig, simulate_scenario

# Families
from claimcart.models import FamilyKind, NodeModel, make_family

# Search
from claimcart.search.chain import ChainConfig, RunResult, TreeSampler, run
from claimcart.search.moves import ProposalMix
from claimcart.search.prior import SplitCandidateSet, TreePriorConfig

# Selection and evaluation
from claimcart.selection.calibrate import calibrate_grid
from claimcart.selection.dic import tree_dic
from claimcart.selection.select import SelectionGrid, expected_counts, predict, run_grid, three_step_select
from claimcart.evaluation.metrics import evaluate, evaluate_many, lift, lift_common_basis
from claimcart.evaluation.stability import stability_assess

from claimcart.errors import ClaimCartError

__all__ = [
    # Core
    "CovariateSchema",
    "Variable",
    "VariableKind",
    "NodeParams",
    "GammaPriorPair",
    "DecisionRule",
    "Tree",
    "route",
    # Data
    "Dataset",
    "load_csv",
    "save_csv",
    "stratified_split",
    "ScenarioConfig",
    "simulate_scenario",
    # Families
    "FamilyKind",
    "NodeModel",
    "make_family",
    # Search
    "TreePriorConfig",
    "SplitCandidateSet",
    "ProposalMix",
    "ChainConfig",
    "RunResult",
    "TreeSampler",
    "run",
    # Selection and evaluation
    "SelectionGrid",
    "run_grid",
    "three_step_select",
    "calibrate_grid",
    "tree_dic",
    "predict",
    "expected_counts",
    "evaluate",
    "evaluate_many",
    "lift",
    "lift_common_basis",
    "stability_assess",
    "ClaimCartError",
]
