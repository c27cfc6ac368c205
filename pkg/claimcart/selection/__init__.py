"""Tree DIC, three-step selection and prediction"""

from claimcart.selection.calibrate import calibrate_grid
from claimcart.selection.dic import DicReport, LeafDic, tree_dic
from claimcart.selection.select import (
    GridPoint,
    SelectionGrid,
    SelectionResult,
    best_in_region,
    expected_counts,
    predict,
    run_grid,
    three_step_select,
)

__all__ = [
    "DicReport",
    "LeafDic",
    "tree_dic",
    "GridPoint",
    "SelectionGrid",
    "SelectionResult",
    "best_in_region",
    "three_step_select",
    "run_grid",
    "predict",
    "expected_counts",
    "calibrate_grid",
]
