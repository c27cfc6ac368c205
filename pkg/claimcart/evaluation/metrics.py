"""
Out-of-sample performance of a finalized tree

Five measures on test data: squared error of the individual claim counts,
squared error of the per-leaf claims frequencies, negative log likelihood,
a variance-weighted version of the per-leaf error, and the lift between the
least and the most risky leaf.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from claimcart.core.tree import Tree
from claimcart.data.dataset import Dataset
from claimcart.errors import MetricError
from claimcart.models.base import NodeModel
from claimcart.selection.select import expected_counts, leaf_frequencies, leaf_params

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["model", "rss_N", "rss_Nv", "nll", "ds_Nv", "lift"]
LEAF_COLUMNS = ["node_id", "m", "claims", "exposure", "empirical", "y_hat", "variance"]


@dataclass
class EvalReport:
    """Test-set metrics of one tree with its per-leaf table"""

    model: str
    rss_individual: float
    rss_portfolio: float
    nll: float
    discrepancy: float
    lift: Optional[float]
    leaves: pd.DataFrame = field(repr=False)

    def as_row(self) -> List[object]:
        return [self.model, self.rss_individual, self.rss_portfolio, self.nll, self.discrepancy, self.lift]


def report_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    return pd.DataFrame([report.as_row() for report in reports], columns=REPORT_COLUMNS)


def leaf_table(tree: Tree, model: NodeModel, test: Dataset) -> pd.DataFrame:
    """
    Test rows, claims and exposure per leaf with the leaf's unit-exposure
    prediction and frequency variance. Leaves without test rows have an
    undefined empirical frequency.
    """
    params = leaf_params(tree)
    ids = tree.apply(test.X)
    records = []
    for node_id, value in sorted(params.items()):
        rows = ids == node_id
        m = int(rows.sum())
        claims = float(test.claims[rows].sum())
        exposure = float(test.exposure[rows].sum())
        records.append(
            (
                node_id,
                m,
                claims,
                exposure,
                claims / exposure if m else np.nan,
                model.node_frequency(value),
                model.node_variance(value),
            )
        )
    return pd.DataFrame(records, columns=LEAF_COLUMNS)


def _with_test_rows(table: pd.DataFrame) -> pd.DataFrame:
    empty = table[table["m"] == 0]
    if not empty.empty:
        logger.warning("Leaves %s receive no test data and are left out", empty["node_id"].tolist())
    return table[table["m"] > 0]


def rss_individual(tree: Tree, model: NodeModel, test: Dataset) -> float:
    """Σ (N_i - N̂_i)² with exposure-scaled predictions."""
    counts, _, _ = expected_counts(tree, model, test)
    return float(np.sum((test.claims - counts) ** 2))


def rss_portfolio(tree: Tree, model: NodeModel, test: Dataset) -> float:
    """Σ over leaves with test data of (empirical frequency - predicted frequency)²."""
    table = _with_test_rows(leaf_table(tree, model, test))
    return float(np.sum((table["empirical"] - table["y_hat"]) ** 2))


def nll(tree: Tree, model: NodeModel, test: Dataset) -> float:
    """Negative log likelihood of the test claims under the leaves' parameters."""
    params = leaf_params(tree)
    ids = tree.apply(test.X)
    total = 0.0
    for node_id, value in params.items():
        rows = ids == node_id
        if rows.any():
            total -= float(model.log_pmf(value, test.claims[rows], test.exposure[rows]).sum())
    return total


def discrepancy(tree: Tree, model: NodeModel, test: Dataset) -> float:
    """
    Per-leaf squared frequency error weighted by the inverse frequency variance.

    Raises:
        MetricError: If a leaf with a non-zero error has zero variance
    """
    table = _with_test_rows(leaf_table(tree, model, test))
    residual = (table["empirical"] - table["y_hat"]).to_numpy() ** 2
    variance = table["variance"].to_numpy()
    degenerate = (variance <= 0.0) & (residual > 0.0)
    if degenerate.any():
        raise MetricError(f"leaf {int(table['node_id'].to_numpy()[degenerate][0])} has zero variance")
    weighted = np.divide(residual, variance, out=np.zeros_like(residual), where=variance > 0.0)
    return float(weighted.sum())


@dataclass(frozen=True)
class ExtremeGroups:
    """Test claims and exposures of the least and most risky leaves"""

    low_claims: np.ndarray
    low_exposure: np.ndarray
    high_claims: np.ndarray
    high_exposure: np.ndarray

    @property
    def v_min(self) -> float:
        return float(self.low_exposure.sum())

    @property
    def v_max(self) -> float:
        return float(self.high_exposure.sum())


def extreme_groups(tree: Tree, model: NodeModel, test: Dataset) -> Optional[ExtremeGroups]:
    """
    Test rows of the leaves with the smallest and the largest predicted frequency.

    Returns ``None`` when the predictions do not separate two leaves or an
    extreme leaf receives no test data. Ties pick the lower node id.
    """
    frequencies = leaf_frequencies(tree, model)
    ordered = sorted(frequencies, key=lambda node_id: (frequencies[node_id], node_id))
    low = ordered[0]
    high = min((n for n in ordered if frequencies[n] == frequencies[ordered[-1]]))
    if frequencies[low] == frequencies[high]:
        logger.warning("Lift is undefined: all leaves predict the same frequency")
        return None
    ids = tree.apply(test.X)
    low_rows, high_rows = ids == low, ids == high
    if not low_rows.any() or not high_rows.any():
        logger.warning("Lift is undefined: an extreme leaf receives no test data")
        return None
    return ExtremeGroups(
        test.claims[low_rows].astype(np.float64),
        test.exposure[low_rows],
        test.claims[high_rows].astype(np.float64),
        test.exposure[high_rows],
    )


def truncated_frequency(claims: np.ndarray, exposure: np.ndarray, basis: float, descending: bool) -> float:
    """
    Empirical frequency of the leading rows, sorted by exposure, whose
    cumulative exposure first reaches ``basis``.

    Equal exposures are ordered by claim count so the result does not depend
    on row order.
    """
    order = np.lexsort((claims, exposure))
    if descending:
        order = order[::-1]
    cumulative = np.cumsum(exposure[order])
    reached = cumulative >= basis * (1.0 - 1e-12)
    k = int(np.argmax(reached)) + 1 if reached.any() else order.size
    return float(claims[order[:k]].sum() / cumulative[k - 1])


def _ratio(high: float, low: float) -> Optional[float]:
    if low == 0.0:
        logger.warning("Lift is undefined: the least risky group has no claims")
        return None
    return high / low


def lift_from_groups(groups: ExtremeGroups, basis: Optional[float] = None) -> Optional[float]:
    """
    Exposure-matched frequency ratio of the most to the least risky group.

    Without a ``basis`` the larger group is cut to the smaller group's total
    exposure: the most risky group by descending exposure, the least risky
    group by ascending exposure. With a ``basis`` both groups are cut to it.
    """
    if basis is None:
        if groups.v_min <= groups.v_max:
            high = truncated_frequency(groups.high_claims, groups.high_exposure, groups.v_min, descending=True)
            low = float(groups.low_claims.sum()) / groups.v_min
        else:
            high = float(groups.high_claims.sum()) / groups.v_max
            low = truncated_frequency(groups.low_claims, groups.low_exposure, groups.v_max, descending=False)
        return _ratio(high, low)
    high = truncated_frequency(groups.high_claims, groups.high_exposure, basis, descending=True)
    low = truncated_frequency(groups.low_claims, groups.low_exposure, basis, descending=False)
    return _ratio(high, low)


def lift(tree: Tree, model: NodeModel, test: Dataset) -> Optional[float]:
    """Lift of one tree, or ``None`` when it is undefined."""
    groups = extreme_groups(tree, model, test)
    return lift_from_groups(groups) if groups is not None else None


def lift_common_basis(trees: Sequence[Tuple[Tree, NodeModel]], test: Dataset) -> List[Optional[float]]:
    """
    Lifts of several trees on one shared exposure basis.

    The basis is the smallest extreme-group total exposure over all trees.
    """
    groups = [extreme_groups(tree, model, test) for tree, model in trees]
    defined = [g for g in groups if g is not None]
    if not defined:
        return [None] * len(trees)
    basis = min(min(g.v_min, g.v_max) for g in defined)
    return [lift_from_groups(g, basis) if g is not None else None for g in groups]


def evaluate(tree: Tree, model: NodeModel, test: Dataset, name: Optional[str] = None) -> EvalReport:
    """All five measures of one tree on a test set."""
    table = leaf_table(tree, model, test)
    report = EvalReport(
        model=name or model.kind.value,
        rss_individual=rss_individual(tree, model, test),
        rss_portfolio=rss_portfolio(tree, model, test),
        nll=nll(tree, model, test),
        discrepancy=discrepancy(tree, model, test),
        lift=lift(tree, model, test),
        leaves=table,
    )
    logger.info(
        "%s: rss_N=%.4f rss_Nv=%.6f nll=%.3f ds_Nv=%.6f lift=%s",
        report.model,
        report.rss_individual,
        report.rss_portfolio,
        report.nll,
        report.discrepancy,
        "undefined" if report.lift is None else f"{report.lift:.4f}",
    )
    return report


def evaluate_many(trees: Dict[str, Tuple[Tree, NodeModel]], test: Dataset) -> List[EvalReport]:
    """Evaluate named trees; with more than one tree the lifts share a common basis."""
    reports = [evaluate(tree, model, test, name) for name, (tree, model) in trees.items()]
    if len(reports) > 1:
        for report, value in zip(reports, lift_common_basis(list(trees.values()), test)):
            report.lift = value
    return reports
