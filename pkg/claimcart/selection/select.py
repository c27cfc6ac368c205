"""
Three-step optimal tree selection

1. Run one chain configuration per target leaf count j with prior
   hyper-parameters (gamma_j, rho_j) concentrated near j leaves.
2. Keep the archived tree with the largest data likelihood of each run.
3. Return the kept tree with the smallest DIC.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from claimcart.core.schema import CovariateSchema
from claimcart.core.tree import Tree
from claimcart.data.dataset import Dataset
from claimcart.errors import ConfigError, SelectionError
from claimcart.models.base import NodeModel
from claimcart.search.chain import ArchiveEntry, ChainConfig, RunResult, TreeSampler
from claimcart.search.prior import SplitCandidateSet
from claimcart.search.trace import TraceBuffer
from claimcart.selection.dic import DicReport, tree_dic

logger = logging.getLogger(__name__)

DIC_TABLE_COLUMNS = ["j", "gamma", "rho", "effective_params", "dic", "log_data_lik"]


@dataclass
class GridPoint:
    """One target leaf count with its prior hyper-parameters and, once run, its archive"""

    j: int
    gamma: float
    rho: float
    archive: List[ArchiveEntry] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {"j": self.j, "gamma": self.gamma, "rho": self.rho}


@dataclass
class SelectionGrid:
    """
    Grid points ordered by strictly increasing target leaf count.

    Example:
        >>> grid = SelectionGrid.parse("2:0.99:20,3:0.99:15")
        >>> [point.j for point in grid.points]
        [2, 3]
    """

    points: List[GridPoint]

    def __post_init__(self) -> None:
        if not self.points:
            raise ConfigError("selection grid is empty")
        counts = [point.j for point in self.points]
        if any(b <= a for a, b in zip(counts, counts[1:])) or counts[0] < 1:
            raise ConfigError(f"grid leaf counts must be positive and strictly increasing, got {counts}")

    @classmethod
    def parse(cls, text: str) -> "SelectionGrid":
        """Read ``j:gamma:rho`` triples separated by commas."""
        points = []
        for item in text.split(","):
            try:
                j, gamma, rho = item.strip().split(":")
                points.append(GridPoint(int(j), float(gamma), float(rho)))
            except ValueError:
                raise ConfigError(f"grid entry {item!r} is not of the form j:gamma:rho") from None
        return cls(points)

    @classmethod
    def from_list(cls, entries: Sequence[Any]) -> "SelectionGrid":
        points = []
        for entry in entries:
            if isinstance(entry, dict):
                points.append(GridPoint(int(entry["j"]), float(entry["gamma"]), float(entry["rho"])))
            else:
                j, gamma, rho = entry
                points.append(GridPoint(int(j), float(gamma), float(rho)))
        return cls(points)

    def to_list(self) -> List[Dict[str, Any]]:
        return [point.to_dict() for point in self.points]

    def archive_dict(self) -> List[Dict[str, Any]]:
        """Grid points with their archived trees, for writing to disk."""
        return [{**point.to_dict(), "entries": [entry.to_dict() for entry in point.archive]} for point in self.points]

    @classmethod
    def from_archive_dict(cls, points: Sequence[Dict[str, Any]], schema: CovariateSchema) -> "SelectionGrid":
        """Read back ``archive_dict`` output; the trees come back detached."""
        return cls(
            [
                GridPoint(
                    int(point["j"]),
                    float(point["gamma"]),
                    float(point["rho"]),
                    [ArchiveEntry.from_dict(entry, schema) for entry in point["entries"]],
                )
                for point in points
            ]
        )


@dataclass
class SelectionResult:
    """The optimal archived tree, its grid point and the per-j comparison"""

    best: ArchiveEntry
    j: int
    table: pd.DataFrame
    reports: Dict[int, DicReport]
    winners: Dict[int, ArchiveEntry]


def derive_seed(seed: int, index: int) -> int:
    """Independent seed for sub-run ``index`` (a grid point or a refit) of a seeded run."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_grid(
    grid: SelectionGrid,
    config: ChainConfig,
    data: Dataset,
    candidates: Optional[SplitCandidateSet] = None,
    trace_for: Optional[Callable[[GridPoint], Optional[TraceBuffer]]] = None,
) -> Dict[int, RunResult]:
    """
    Run the chain at every grid point and store each archive on its point.

    The candidate set depends only on the data and split-space settings, so
    it is shared by all points. ``trace_for`` supplies a trace buffer per point.
    """
    candidates = candidates or SplitCandidateSet.from_data(data, config.prior)
    results = {}
    for point in grid.points:
        prior = replace(config.prior, gamma=point.gamma, rho=point.rho)
        point_config = replace(config, prior=prior, seed=derive_seed(config.seed, point.j))
        logger.info("Grid point j=%d (gamma=%g, rho=%g)", point.j, point.gamma, point.rho)
        result = TreeSampler(point_config, data, candidates).run(trace_for(point) if trace_for else None)
        point.archive = result.archive
        results[point.j] = result
    return results


def best_in_region(archive: Sequence[ArchiveEntry]) -> ArchiveEntry:
    """
    The archived tree with the largest log data likelihood at its posterior means.

    Ties go to fewer leaves, then to the earlier (restart, iteration).

    Raises:
        SelectionError: If the archive is empty
    """
    if not archive:
        raise SelectionError("archive is empty")
    return min(archive, key=lambda e: (-e.log_data_lik, e.n_leaves, e.restart, e.iteration))


def three_step_select(grid: SelectionGrid, data: Dataset, model: NodeModel) -> SelectionResult:
    """
    Pick the maximum-likelihood tree per grid point, then the minimum-DIC one.

    Grid points whose run archived nothing are skipped with a warning.

    Raises:
        SelectionError: If no grid point has an archived tree
    """
    rows = []
    reports: Dict[int, DicReport] = {}
    winners: Dict[int, ArchiveEntry] = {}
    for point in grid.points:
        if not point.archive:
            logger.warning("Grid point j=%d archived no tree and is skipped", point.j)
            continue
        winner = best_in_region(point.archive)
        tree = winner.tree if winner.tree.root.stats.rows is not None else winner.tree.attach(data)
        report = tree_dic(tree, model, data, summaries=winner.summaries)
        reports[point.j] = report
        winners[point.j] = winner
        rows.append((point.j, point.gamma, point.rho, report.effective_params, report.dic, winner.log_data_lik))
        logger.debug("j=%d: %d leaves, DIC %.3f", point.j, winner.n_leaves, report.dic)
    if not rows:
        raise SelectionError("no grid point archived a tree")

    table = pd.DataFrame(rows, columns=DIC_TABLE_COLUMNS)
    # ties go to the smallest j
    best_j = int(table.loc[table["dic"].idxmin(), "j"])
    best = winners[best_j]
    logger.info("Selected j=%d: %d leaves, DIC %.3f", best_j, best.n_leaves, reports[best_j].dic)
    return SelectionResult(best, best_j, table, reports, winners)


def leaf_params(tree: Tree) -> Dict[int, Any]:
    """Leaf parameters by node id; every leaf must carry parameters."""
    ids = tree.node_ids()
    params = {}
    for path, leaf in tree.leaves():
        if leaf.params is None:
            raise ValueError(f"leaf {ids[path]} has no parameters")
        params[ids[path]] = leaf.params
    return params


def predict(tree: Tree, model: NodeModel, x: Sequence[Any], exposure: float) -> float:
    """
    Expected claim count of one raw covariate vector at an exposure.

    Raises:
        RoutingError: If a categorical value was never declared
    """
    node_id = tree.route(x)
    return float(model.expected_count(leaf_params(tree)[node_id], np.array([exposure]))[0])


def expected_counts(tree: Tree, model: NodeModel, data: Dataset) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorised predictions for a dataset.

    Returns:
        Expected claim counts, landing node ids and unit-exposure node frequencies
    """
    params = leaf_params(tree)
    ids = tree.apply(data.X)
    counts = np.empty(data.n)
    frequency = np.empty(data.n)
    for node_id, value in params.items():
        rows = ids == node_id
        counts[rows] = model.expected_count(value, data.exposure[rows])
        frequency[rows] = model.node_frequency(value)
    return counts, ids, frequency


def leaf_frequencies(tree: Tree, model: NodeModel) -> Dict[int, float]:
    return {node_id: model.node_frequency(value) for node_id, value in leaf_params(tree).items()}

