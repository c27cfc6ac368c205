"""
Binary decision trees for claimcart

Trees are immutable values. Nodes are addressed by paths (tuples of 0 for
left and 1 for right, the root being the empty path); every structural edit
copies the path from the root to the edited node and shares everything else.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from claimcart.core.params import NodeParams
from claimcart.core.schema import CovariateSchema
from claimcart.errors import EditRejected, SchemaError

if TYPE_CHECKING:
    from claimcart.data.dataset import Dataset

Path = Tuple[int, ...]
LEFT = 0
RIGHT = 1


@dataclass(frozen=True)
class DecisionRule:
    """
    A split on one covariate.

    Numeric rules send ``x`` left when ``x[variable_index] < threshold``;
    categorical rules send it left when its level code is in ``subset``.

    Example:
        >>> rule = DecisionRule(0, threshold=0.0)
        >>> rule.goes_left(np.array([-1.0, 2.0])).tolist()
        [True, False]
    """

    variable_index: int
    threshold: Optional[float] = None
    subset: Optional[FrozenSet[int]] = None

    def __post_init__(self) -> None:
        if (self.threshold is None) == (self.subset is None):
            raise ValueError("exactly one of threshold and subset must be set")
        if self.subset is not None and not self.subset:
            raise ValueError("category subset must be non-empty")

    @property
    def is_categorical(self) -> bool:
        return self.subset is not None

    def goes_left(self, column: np.ndarray) -> np.ndarray:
        """Vectorised predicate over one covariate column."""
        if self.subset is None:
            return column < self.threshold
        return np.isin(column, np.fromiter(self.subset, dtype=np.float64))

    def validate(self, schema: CovariateSchema) -> None:
        variable = schema[self.variable_index]
        if variable.is_categorical != self.is_categorical:
            raise SchemaError(f"rule kind does not match variable {variable.name!r}")
        if self.subset is not None:
            if len(self.subset) >= len(variable.levels) or max(self.subset) >= len(variable.levels):
                raise SchemaError(f"subset must be a proper subset of the levels of {variable.name!r}")

    def describe(self, schema: CovariateSchema) -> str:
        variable = schema[self.variable_index]
        if self.subset is None:
            return f"{variable.name} < {self.threshold:.6g}"
        levels = ", ".join(variable.levels[code] for code in sorted(self.subset))
        return f"{variable.name} in {{{levels}}}"


@dataclass(frozen=True, eq=False)
class NodeSuffStats:
    """
    Aggregates of the training rows assigned to a node.

    ``rows`` is ``None`` for trees read back from disk without training data.
    ``cache`` holds row-set derived quantities (split candidates, dispersion
    estimates); nodes sharing a row set share the stats object and its cache.
    """

    rows: Optional[np.ndarray]
    n: int
    sum_claims: int
    sum_exposure: float
    cache: Dict[Any, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def from_rows(cls, rows: np.ndarray, data: "Dataset") -> "NodeSuffStats":
        rows = np.asarray(rows, dtype=np.int64)
        return cls(
            rows=rows,
            n=int(rows.size),
            sum_claims=int(data.claims[rows].sum()),
            sum_exposure=float(data.exposure[rows].sum()),
        )

    def has_rows(self, rows: np.ndarray) -> bool:
        return self.rows is not None and self.rows.shape == rows.shape and bool(np.array_equal(self.rows, rows))

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "sum_claims": self.sum_claims, "sum_exposure": self.sum_exposure}


@dataclass(frozen=True, eq=False)
class Leaf:
    """Terminal node"""

    stats: NodeSuffStats
    params: Optional[NodeParams] = None


@dataclass(frozen=True, eq=False)
class Internal:
    """Split node; ``cache`` holds quantities that depend on the whole subtree"""

    rule: DecisionRule
    left: "Node"
    right: "Node"
    stats: NodeSuffStats
    cache: Dict[Any, Any] = field(default_factory=dict, repr=False)

    def child(self, side: int) -> "Node":
        return self.left if side == LEFT else self.right


Node = Union[Leaf, Internal]


class Tree:
    """
    An immutable binary decision tree over a covariate schema.

    Node ids are preorder positions (root 0, left subtree before right).

    Example:
        >>> tree = Tree.root_only(data)
        >>> tree.n_leaves
        1
    """

    def __init__(self, root: Node, schema: CovariateSchema):
        self.root = root
        self.schema = schema
        self.cache: Dict[Any, Any] = {}

    @classmethod
    def root_only(cls, data: "Dataset") -> "Tree":
        return cls(Leaf(NodeSuffStats.from_rows(np.arange(data.n), data)), data.schema)

    # Navigation

    def node(self, path: Path) -> Node:
        node = self.root
        for side in path:
            if not isinstance(node, Internal):
                raise KeyError(f"path {path} runs past a leaf")
            node = node.child(side)
        return node

    def walk(self) -> Iterator[Tuple[Path, Node]]:
        """Preorder traversal yielding (path, node)."""
        stack: List[Tuple[Path, Node]] = [((), self.root)]
        while stack:
            path, node = stack.pop()
            yield path, node
            if isinstance(node, Internal):
                stack.append((path + (RIGHT,), node.right))
                stack.append((path + (LEFT,), node.left))

    def leaves(self) -> List[Tuple[Path, Leaf]]:
        return [(path, node) for path, node in self.walk() if isinstance(node, Leaf)]

    def internals(self) -> List[Tuple[Path, Internal]]:
        return [(path, node) for path, node in self.walk() if isinstance(node, Internal)]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def node_ids(self) -> Dict[Path, int]:
        return {path: i for i, (path, _) in enumerate(self.walk())}

    def prunable(self) -> List[Path]:
        """Internal nodes whose two children are both leaves."""
        return [
            path
            for path, node in self.internals()
            if isinstance(node.left, Leaf) and isinstance(node.right, Leaf)
        ]

    def parent_child_pairs(self) -> List[Tuple[Path, Path]]:
        """(parent, child) pairs of internal nodes."""
        pairs = []
        for path, node in self.internals():
            for side in (LEFT, RIGHT):
                if isinstance(node.child(side), Internal):
                    pairs.append((path, path + (side,)))
        return pairs

    def variable_usage(self) -> np.ndarray:
        """Number of internal nodes splitting on each variable."""
        usage = np.zeros(self.schema.p, dtype=np.int64)
        for _, node in self.internals():
            usage[node.rule.variable_index] += 1
        return usage

    def signature(self) -> Any:
        """Hashable description of topology and rules."""

        def sig(node: Node) -> Any:
            if isinstance(node, Leaf):
                return None
            return (node.rule, sig(node.left), sig(node.right))

        return sig(self.root)

    # Routing

    def route(self, x: Sequence[Any]) -> int:
        """
        Node id of the leaf a raw covariate vector lands in.

        Raises:
            RoutingError: If a categorical value is not a declared level
        """
        coded = self.schema.encode(x)
        path: Path = ()
        node = self.root
        while isinstance(node, Internal):
            side = LEFT if node.rule.goes_left(np.array([coded[node.rule.variable_index]]))[0] else RIGHT
            path = path + (side,)
            node = node.child(side)
        return self.node_ids()[path]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id for every row of a coded covariate matrix."""
        ids = self.node_ids()
        out = np.empty(X.shape[0], dtype=np.int64)

        def descend(node: Node, path: Path, rows: np.ndarray) -> None:
            if isinstance(node, Leaf):
                out[rows] = ids[path]
                return
            mask = node.rule.goes_left(X[rows, node.rule.variable_index])
            descend(node.left, path + (LEFT,), rows[mask])
            descend(node.right, path + (RIGHT,), rows[~mask])

        descend(self.root, (), np.arange(X.shape[0]))
        return out

    # Editing

    def replace(self, path: Path, new: Node) -> "Tree":
        """Copy the root-to-path spine with ``new`` substituted at ``path``."""
        return Tree(_substitute(self.root, path, new), self.schema)

    def with_params(self, params: Dict[Path, NodeParams]) -> "Tree":
        """Attach leaf parameters, keyed by leaf path."""

        def attach(node: Node, path: Path) -> Node:
            if isinstance(node, Leaf):
                return Leaf(node.stats, params[path])
            left = attach(node.left, path + (LEFT,))
            return Internal(node.rule, left, attach(node.right, path + (RIGHT,)), node.stats)

        return Tree(attach(self.root, ()), self.schema)

    def attach(self, data: "Dataset") -> "Tree":
        """
        Route the rows of ``data`` through the tree's rules, keeping leaf parameters.

        Used to re-attach a tree read from disk to the training set it was fit on.

        Raises:
            ValueError: If the stored node sizes do not match the routed rows
        """

        def descend(node: Node, rows: np.ndarray) -> Node:
            if node.stats.n != rows.size:
                raise ValueError(f"tree node holds {node.stats.n} rows, the data routes {rows.size}")
            stats = NodeSuffStats.from_rows(rows, data)
            if isinstance(node, Leaf):
                return Leaf(stats, node.params)
            mask = node.rule.goes_left(data.X[rows, node.rule.variable_index])
            return Internal(node.rule, descend(node.left, rows[mask]), descend(node.right, rows[~mask]), stats)

        return Tree(descend(self.root, np.arange(data.n)), self.schema)

    # Serialization

    def to_dict(self) -> Dict[str, Any]:
        def encode(node: Node) -> Dict[str, Any]:
            if isinstance(node, Leaf):
                entry: Dict[str, Any] = {"kind": "leaf", "leaf_stats": node.stats.to_dict()}
                if node.params is not None:
                    entry["leaf_params"] = node.params.to_dict()
                return entry
            variable = self.schema[node.rule.variable_index]
            entry = {"kind": "internal", "variable": variable.name}
            if node.rule.subset is None:
                entry["threshold"] = node.rule.threshold
            else:
                entry["subset"] = [variable.levels[code] for code in sorted(node.rule.subset)]
            entry["children"] = [encode(node.left), encode(node.right)]
            return entry

        return encode(self.root)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], schema: CovariateSchema) -> "Tree":
        """Rebuild a detached tree (no training rows) from ``to_dict`` output."""

        def decode(entry: Dict[str, Any]) -> Node:
            if entry["kind"] == "leaf":
                s = entry["leaf_stats"]
                stats = NodeSuffStats(None, int(s["n"]), int(s["sum_claims"]), float(s["sum_exposure"]))
                params = entry.get("leaf_params")
                return Leaf(stats, NodeParams.from_dict(params) if params is not None else None)
            index = schema.index(entry["variable"])
            if "subset" in entry:
                variable = schema[index]
                rule = DecisionRule(index, subset=frozenset(variable.code(level) for level in entry["subset"]))
            else:
                rule = DecisionRule(index, threshold=float(entry["threshold"]))
            rule.validate(schema)
            left, right = (decode(child) for child in entry["children"])
            n = left.stats.n + right.stats.n
            stats = NodeSuffStats(
                None,
                n,
                left.stats.sum_claims + right.stats.sum_claims,
                left.stats.sum_exposure + right.stats.sum_exposure,
            )
            return Internal(rule, left, right, stats)

        return cls(decode(data), schema)

    def describe(self) -> str:
        """Indented text rendering of rules and leaf estimates."""
        ids = self.node_ids()
        lines = []
        for path, node in self.walk():
            indent = "  " * len(path)
            if isinstance(node, Internal):
                lines.append(f"{indent}[{ids[path]}] {node.rule.describe(self.schema)}")
            else:
                params = "" if node.params is None else " " + " ".join(
                    f"{key}={value:.4g}" for key, value in node.params.to_dict().items()
                )
                lines.append(
                    f"{indent}[{ids[path]}] leaf n={node.stats.n} "
                    f"claims={node.stats.sum_claims} exposure={node.stats.sum_exposure:.4g}{params}"
                )
        return "\n".join(lines)


def _substitute(node: Node, path: Path, new: Node) -> Node:
    if not path:
        return new
    if not isinstance(node, Internal):
        raise KeyError("path runs past a leaf")
    side, rest = path[0], path[1:]
    if side == LEFT:
        return Internal(node.rule, _substitute(node.left, rest, new), node.right, node.stats)
    return Internal(node.rule, node.left, _substitute(node.right, rest, new), node.stats)


def rebuild(template: Node, rows: np.ndarray, data: "Dataset", min_node_size: int) -> Node:
    """
    Re-route ``rows`` through the rules of ``template``.

    Nodes whose row sets are unchanged are returned as they are; a leaf
    ending up with fewer than ``min_node_size`` rows raises EditRejected.
    """
    if isinstance(template, Leaf):
        if template.stats.has_rows(rows):
            return template
        if rows.size < min_node_size:
            raise EditRejected(f"leaf would hold {rows.size} rows")
        return Leaf(NodeSuffStats.from_rows(rows, data))
    mask = template.rule.goes_left(data.X[rows, template.rule.variable_index])
    left = rebuild(template.left, rows[mask], data, min_node_size)
    right = rebuild(template.right, rows[~mask], data, min_node_size)
    stats = template.stats if template.stats.has_rows(rows) else NodeSuffStats.from_rows(rows, data)
    if left is template.left and right is template.right and stats is template.stats:
        return template
    return Internal(template.rule, left, right, stats)


@dataclass(frozen=True)
class Grow:
    path: Path
    rule: DecisionRule


@dataclass(frozen=True)
class Prune:
    """Collapse the two leaf children of the internal node at ``path``."""

    path: Path


@dataclass(frozen=True)
class ChangeRule:
    path: Path
    rule: DecisionRule


@dataclass(frozen=True)
class SwapRules:
    parent: Path
    child: Path


Edit = Union[Grow, Prune, ChangeRule, SwapRules]


def apply_structural_edit(tree: Tree, edit: Edit, data: "Dataset", min_node_size: int) -> Tree:
    """
    Apply one structural edit and return the new tree.

    Only the rows of the edited subtree are re-routed; every other node
    object is shared with the input tree.

    Raises:
        EditRejected: If a resulting leaf falls below ``min_node_size``
        ValueError: If the edit does not fit the tree's shape
    """
    if isinstance(edit, Grow):
        leaf = tree.node(edit.path)
        if not isinstance(leaf, Leaf):
            raise ValueError(f"grow target {edit.path} is not a leaf")
        rows = _rows(leaf)
        mask = edit.rule.goes_left(data.X[rows, edit.rule.variable_index])
        n_left = int(mask.sum())
        if min(n_left, rows.size - n_left) < min_node_size:
            raise EditRejected("grow leaves a child below the minimum size")
        new: Node = Internal(
            edit.rule,
            Leaf(NodeSuffStats.from_rows(rows[mask], data)),
            Leaf(NodeSuffStats.from_rows(rows[~mask], data)),
            leaf.stats,
        )
        return tree.replace(edit.path, new)

    if isinstance(edit, Prune):
        node = tree.node(edit.path)
        if not (isinstance(node, Internal) and isinstance(node.left, Leaf) and isinstance(node.right, Leaf)):
            raise ValueError(f"prune target {edit.path} does not have two leaf children")
        return tree.replace(edit.path, Leaf(node.stats))

    if isinstance(edit, ChangeRule):
        node = tree.node(edit.path)
        if not isinstance(node, Internal):
            raise ValueError(f"change target {edit.path} is not an internal node")
        template = Internal(edit.rule, node.left, node.right, node.stats)
        return tree.replace(edit.path, rebuild(template, _rows(node), data, min_node_size))

    if isinstance(edit, SwapRules):
        parent = tree.node(edit.parent)
        if len(edit.child) != len(edit.parent) + 1 or edit.child[: len(edit.parent)] != edit.parent:
            raise ValueError("swap child must be a direct child of the parent")
        side = edit.child[-1]
        if not isinstance(parent, Internal):
            raise ValueError(f"swap parent {edit.parent} is not an internal node")
        child = parent.child(side)
        if not isinstance(child, Internal):
            raise ValueError(f"swap child {edit.child} is not an internal node")
        demoted = Internal(parent.rule, child.left, child.right, child.stats)
        left, right = (demoted, parent.right) if side == LEFT else (parent.left, demoted)
        template = Internal(child.rule, left, right, parent.stats)
        return tree.replace(edit.parent, rebuild(template, _rows(parent), data, min_node_size))

    raise TypeError(f"unknown edit {edit!r}")


def _rows(node: Node) -> np.ndarray:
    if node.stats.rows is None:
        raise ValueError("tree is detached from its training data")
    return node.stats.rows


def route(tree: Tree, x: Sequence[Any]) -> int:
    """Node id of the leaf ``x`` lands in; see Tree.route."""
    return tree.route(x)
