"""
Tree prior and split candidates

The prior grows each node at depth d with probability gamma * (1 + d) ** -rho
and, when it splits, picks a variable uniformly among those with a feasible
split and a cut point uniformly among that variable's feasible cut points.
The grow proposal draws rules from exactly the same measure.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence

import numpy as np

from claimcart.core.tree import DecisionRule, Internal, Leaf, Node, NodeSuffStats, Tree

if TYPE_CHECKING:
    from claimcart.data.dataset import Dataset

logger = logging.getLogger(__name__)

RuleTable = Dict[int, List[DecisionRule]]


@dataclass(frozen=True)
class TreePriorConfig:
    """
    Branching-process prior and split-space settings.

    Args:
        gamma: Split probability at the root, in (0, 1]
        rho: Depth decay of the split probability
        numeric_grid_size: Number of quantiles in each numeric split grid
        min_node_size: Minimum number of training rows in every leaf
    """

    gamma: float = 0.99
    rho: float = 15.0
    numeric_grid_size: int = 100
    min_node_size: int = 10

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.rho < 0.0:
            raise ValueError(f"rho must be non-negative, got {self.rho}")
        if self.numeric_grid_size < 2:
            raise ValueError(f"numeric_grid_size must be at least 2, got {self.numeric_grid_size}")
        if self.min_node_size < 1:
            raise ValueError(f"min_node_size must be at least 1, got {self.min_node_size}")


def split_probability(depth: int, config: TreePriorConfig) -> float:
    """Prior probability that a node at ``depth`` splits."""
    if depth < 0:
        raise ValueError(f"depth must be non-negative, got {depth}")
    return min(1.0, config.gamma * (1.0 + depth) ** (-config.rho))


class SplitCandidateSet:
    """
    Split candidates for one training set.

    Numeric variables get a sorted, de-duplicated grid of observed quantiles
    computed once on the full training set. Categorical variables are cut in
    the order of their empirical claims frequency within the node being
    split, so a cut after the k-th level sends the k least risky levels left.
    """

    def __init__(self, data: "Dataset", grids: Dict[int, np.ndarray], min_node_size: int):
        self.data = data
        self.grids = grids
        self.min_node_size = min_node_size
        self._key = ("rules", id(self))

    @classmethod
    def from_data(cls, data: "Dataset", config: TreePriorConfig) -> "SplitCandidateSet":
        probabilities = np.linspace(0.0, 1.0, config.numeric_grid_size + 2)[1:-1]
        grids = {}
        for j, variable in enumerate(data.schema.variables):
            if not variable.is_categorical:
                grids[j] = np.unique(np.quantile(data.X[:, j], probabilities, method="inverted_cdf"))
        return cls(data, grids, config.min_node_size)

    def level_order(self, variable_index: int, rows: np.ndarray) -> np.ndarray:
        """
        Level codes present in ``rows``, by ascending empirical frequency.

        Ties keep declaration order.
        """
        n_levels = len(self.data.schema[variable_index].levels)
        codes = self.data.X[rows, variable_index].astype(np.int64)
        counts = np.bincount(codes, minlength=n_levels)
        claims = np.bincount(codes, weights=self.data.claims[rows], minlength=n_levels)
        exposure = np.bincount(codes, weights=self.data.exposure[rows], minlength=n_levels)
        present = np.flatnonzero(counts > 0)
        frequency = claims[present] / exposure[present]
        return present[np.argsort(frequency, kind="stable")]

    def feasible(self, stats: NodeSuffStats) -> RuleTable:
        """Rules that split the node into two children of at least the minimum size."""
        table = stats.cache.get(self._key)
        if table is None:
            rows = _require_rows(stats)
            table = self._split_space(rows, [rows], [rows])
            stats.cache[self._key] = table
        return table

    def valid(self, node: Internal) -> RuleTable:
        """
        Rules that could sit at ``node`` with its current subtrees kept.

        A rule is valid when re-routing the node's rows through it and the
        unchanged descendants leaves every leaf at or above the minimum size.
        """
        table = node.cache.get(self._key)
        if table is None:
            rows = _require_rows(node.stats)
            left = _leaf_groups(node.left, rows, self.data)
            table = self._split_space(rows, left, _leaf_groups(node.right, rows, self.data))
            node.cache[self._key] = table
        return table

    def _split_space(
        self, rows: np.ndarray, left_groups: Sequence[np.ndarray], right_groups: Sequence[np.ndarray]
    ) -> RuleTable:
        m = self.min_node_size
        X = self.data.X
        table: RuleTable = {}
        if rows.size < 2 * m:
            return {j: [] for j in range(self.data.schema.p)}
        for j, variable in enumerate(self.data.schema.variables):
            if variable.is_categorical:
                order = self.level_order(j, rows)
                if order.size < 2:
                    table[j] = []
                    continue
                n_levels = len(variable.levels)
                ok = np.ones(order.size - 1, dtype=bool)
                for group in left_groups:
                    counts = np.bincount(X[group, j].astype(np.int64), minlength=n_levels)[order]
                    ok &= np.cumsum(counts)[:-1] >= m
                for group in right_groups:
                    counts = np.bincount(X[group, j].astype(np.int64), minlength=n_levels)[order]
                    ok &= group.size - np.cumsum(counts)[:-1] >= m
                table[j] = [
                    DecisionRule(j, subset=frozenset(int(code) for code in order[:k]))
                    for k in np.flatnonzero(ok) + 1
                ]
            else:
                grid = self.grids[j]
                ok = np.ones(grid.size, dtype=bool)
                for group in left_groups:
                    ok &= np.searchsorted(np.sort(X[group, j]), grid, side="left") >= m
                for group in right_groups:
                    ok &= group.size - np.searchsorted(np.sort(X[group, j]), grid, side="left") >= m
                table[j] = [DecisionRule(j, threshold=float(c)) for c in grid[ok]]
        return table


def _require_rows(stats: NodeSuffStats) -> np.ndarray:
    if stats.rows is None:
        raise ValueError("split candidates need a tree attached to its training data")
    return stats.rows


def _leaf_groups(node: Node, rows: np.ndarray, data: "Dataset") -> List[np.ndarray]:
    """Rows grouped by the leaf of ``node``'s subtree they would reach."""
    if isinstance(node, Leaf):
        return [rows]
    mask = node.rule.goes_left(data.X[rows, node.rule.variable_index])
    return _leaf_groups(node.left, rows[mask], data) + _leaf_groups(node.right, rows[~mask], data)


def available_variables(table: RuleTable) -> List[int]:
    return [j for j in sorted(table) if table[j]]


def rule_log_prob(table: RuleTable, rule: DecisionRule) -> float:
    """Log probability of ``rule`` under uniform variable then uniform cut point."""
    rules = table.get(rule.variable_index, [])
    if rule not in rules:
        return -math.inf
    return -math.log(len(available_variables(table))) - math.log(len(rules))


def draw_rule(table: RuleTable, rng: np.random.Generator) -> Optional[DecisionRule]:
    variables = available_variables(table)
    if not variables:
        return None
    rules = table[variables[int(rng.integers(len(variables)))]]
    return rules[int(rng.integers(len(rules)))]


def propose_rule(
    stats: NodeSuffStats, candidates: SplitCandidateSet, rng: np.random.Generator
) -> Optional[DecisionRule]:
    """
    Draw a split rule for a node, or ``None`` when no rule is feasible.

    Drawing the variable among those with a feasible cut, then the cut among
    the feasible ones, is the same measure as retrying infeasible draws
    without replacement until one fits.
    """
    return draw_rule(candidates.feasible(stats), rng)


def log_tree_prior(tree: Tree, candidates: SplitCandidateSet, config: TreePriorConfig) -> float:
    """
    Log prior probability of a tree.

    A node without any feasible split cannot split, so its leaf term is 0;
    an internal rule outside the node's feasible set has probability 0.
    """
    total = 0.0
    for path, node in tree.walk():
        table = candidates.feasible(node.stats)
        p_split = split_probability(len(path), config) if available_variables(table) else 0.0
        if isinstance(node, Leaf):
            total += math.log1p(-p_split) if p_split < 1.0 else -math.inf
        else:
            if p_split == 0.0:
                return -math.inf
            total += math.log(p_split) + rule_log_prob(table, node.rule)
    return total
