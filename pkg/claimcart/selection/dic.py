"""
Deviance information criterion of a tree
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import pandas as pd

from claimcart.core.params import LatentState, LatentSummary
from claimcart.core.tree import Path, Tree
from claimcart.data.dataset import Dataset
from claimcart.models.base import NodeModel


@dataclass(frozen=True)
class LeafDic:
    node_id: int
    n: int
    deviance: float
    effective_params: float
    dic: float


@dataclass(frozen=True)
class DicReport:
    """
    Per-leaf DIC entries with the tree totals.

    The totals are the sums of the leaf entries.
    """

    leaves: Tuple[LeafDic, ...]
    deviance: float
    effective_params: float
    dic: float

    @classmethod
    def from_leaves(cls, leaves: Tuple[LeafDic, ...]) -> "DicReport":
        return cls(
            leaves=leaves,
            deviance=sum(leaf.deviance for leaf in leaves),
            effective_params=sum(leaf.effective_params for leaf in leaves),
            dic=sum(leaf.dic for leaf in leaves),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(leaf.node_id, leaf.n, leaf.deviance, leaf.effective_params, leaf.dic) for leaf in self.leaves],
            columns=["node_id", "n", "deviance", "effective_params", "dic"],
        )


def tree_dic(
    tree: Tree,
    model: NodeModel,
    data: Dataset,
    latents: Optional[LatentState] = None,
    summaries: Optional[Dict[Path, LatentSummary]] = None,
) -> DicReport:
    """
    DIC of a tree attached to its training data.

    Augmented families need either the row latents or the per-leaf latent
    summaries stored with an archived tree; the leaf parameters are the
    full-conditional means given those latents.

    Example:
        >>> tree_dic(Tree.root_only(data), PoissonModel(GammaPriorPair(1.0, 1.0)), data).dic
        1.0
    """
    ids = tree.node_ids()
    leaves = []
    for path, leaf in tree.leaves():
        summary = summaries.get(path) if summaries else None
        if model.augmented and summary is None and latents is None:
            raise ValueError("augmented families need latents or leaf summaries for DIC")
        entry = model.node_dic(leaf.stats, data, latents=latents, summary=summary)
        leaves.append(LeafDic(ids[path], leaf.stats.n, entry.deviance, entry.effective_params, entry.dic))
    return DicReport.from_leaves(tuple(leaves))
