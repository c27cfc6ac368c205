"""Tests for routing, structural edits and tree serialization"""

import numpy as np
import pytest

from conftest import categorical_schema, make_dataset, numeric_schema

from claimcart.core.params import NodeParams
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
from claimcart.errors import EditRejected, RoutingError

X1_NEGATIVE = DecisionRule(0, threshold=0.0)
X2_NEGATIVE = DecisionRule(1, threshold=0.0)


def assert_partition(tree: Tree, n: int) -> None:
    rows = np.concatenate([leaf.stats.rows for _, leaf in tree.leaves()])
    assert rows.size == n
    np.testing.assert_array_equal(np.sort(rows), np.arange(n))


def assert_stats_match_routing(tree: Tree, data) -> None:
    ids = tree.apply(data.X)
    node_ids = tree.node_ids()
    for path, leaf in tree.leaves():
        expected = np.flatnonzero(ids == node_ids[path])
        np.testing.assert_array_equal(leaf.stats.rows, expected)
        assert leaf.stats.n == expected.size
        assert leaf.stats.sum_claims == int(data.claims[expected].sum())
        assert leaf.stats.sum_exposure == pytest.approx(float(data.exposure[expected].sum()))


class TestRouting:
    def test_root_only_tree_routes_everything_to_the_root(self, normal_data):
        tree = Tree.root_only(normal_data)
        assert route(tree, [5.0, -3.0]) == 0
        assert tree.n_leaves == 1

    def test_numeric_rule_sends_smaller_values_left(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        assert tree.route([-1.0, 0.0]) == 1
        assert tree.route([2.0, 0.0]) == 2

    def test_categorical_rule_uses_subset_membership(self):
        schema = categorical_schema("x7", ["A", "B", "C"])
        rule = DecisionRule(0, subset=frozenset({0, 1}))
        root = Internal(rule, Leaf(_detached(1)), Leaf(_detached(1)), _detached(2))
        tree = Tree(root, schema)
        assert tree.route(["B"]) == 1
        assert tree.route(["C"]) == 2

    def test_unknown_level_names_variable_and_level(self):
        schema = categorical_schema("x7", ["A", "B"])
        root = Internal(DecisionRule(0, subset=frozenset({0})), Leaf(_detached(1)), Leaf(_detached(1)), _detached(2))
        with pytest.raises(RoutingError) as info:
            Tree(root, schema).route(["Z"])
        assert info.value.variable == "x7"
        assert info.value.level == "Z"

    def test_apply_matches_route(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        tree = apply_structural_edit(tree, Grow((1,), X2_NEGATIVE), normal_data, 5)
        ids = tree.apply(normal_data.X)
        for i in range(0, normal_data.n, 17):
            assert ids[i] == tree.route(normal_data.X[i].tolist())


class TestRules:
    def test_rule_needs_exactly_one_form(self):
        with pytest.raises(ValueError):
            DecisionRule(0)
        with pytest.raises(ValueError):
            DecisionRule(0, threshold=1.0, subset=frozenset({0}))
        with pytest.raises(ValueError):
            DecisionRule(0, subset=frozenset())


class TestStructuralEdits:
    def test_grow_partitions_the_rows(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        assert tree.n_leaves == 2
        assert_partition(tree, normal_data.n)
        assert_stats_match_routing(tree, normal_data)

    def test_prune_undoes_grow(self, normal_data):
        original = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        grown = apply_structural_edit(original, Grow((0,), X2_NEGATIVE), normal_data, 5)
        pruned = apply_structural_edit(grown, Prune((0,)), normal_data, 5)
        assert pruned.signature() == original.signature()
        for (_, a), (_, b) in zip(pruned.leaves(), original.leaves()):
            np.testing.assert_array_equal(a.stats.rows, b.stats.rows)

    def test_untouched_nodes_are_shared(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        grown = apply_structural_edit(tree, Grow((0,), X2_NEGATIVE), normal_data, 5)
        assert grown.node((1,)) is tree.node((1,))
        assert grown.root.stats is tree.root.stats

    def test_swap_exchanges_rules_and_reroutes(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        tree = apply_structural_edit(tree, Grow((0,), X2_NEGATIVE), normal_data, 5)
        swapped = apply_structural_edit(tree, SwapRules((), (0,)), normal_data, 5)
        assert swapped.root.rule == X2_NEGATIVE
        assert swapped.node((0,)).rule == X1_NEGATIVE
        assert swapped.n_leaves == tree.n_leaves
        assert_partition(swapped, normal_data.n)
        assert_stats_match_routing(swapped, normal_data)

    def test_change_rule_reroutes_subtree(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        tree = apply_structural_edit(tree, Grow((1,), X2_NEGATIVE), normal_data, 5)
        changed = apply_structural_edit(tree, ChangeRule((), DecisionRule(0, threshold=-0.3)), normal_data, 5)
        assert changed.root.rule.threshold == -0.3
        assert_stats_match_routing(changed, normal_data)

    def test_small_child_is_rejected_not_an_error(self, normal_data):
        extreme = DecisionRule(0, threshold=float(np.sort(normal_data.X[:, 0])[3]))
        with pytest.raises(EditRejected):
            apply_structural_edit(Tree.root_only(normal_data), Grow((), extreme), normal_data, 5)

    def test_prune_needs_two_leaf_children(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        tree = apply_structural_edit(tree, Grow((0,), X2_NEGATIVE), normal_data, 5)
        with pytest.raises(ValueError):
            apply_structural_edit(tree, Prune(()), normal_data, 5)
        assert tree.prunable() == [(0,)]

    def test_random_edit_sequences_keep_stats_consistent(self, normal_data):
        rng = np.random.default_rng(3)
        tree = Tree.root_only(normal_data)
        for _ in range(40):
            leaves = tree.leaves()
            path, _ = leaves[int(rng.integers(len(leaves)))]
            rule = DecisionRule(int(rng.integers(2)), threshold=float(rng.normal(0.0, 0.7)))
            try:
                tree = apply_structural_edit(tree, Grow(path, rule), normal_data, 5)
            except EditRejected:
                prunable = tree.prunable()
                if prunable:
                    tree = apply_structural_edit(tree, Prune(prunable[0]), normal_data, 5)
            assert_partition(tree, normal_data.n)
            assert_stats_match_routing(tree, normal_data)


class TestSerialization:
    def test_round_trip_keeps_rules_params_and_sizes(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        tree = tree.with_params({(0,): NodeParams(0.5), (1,): NodeParams(1.5)})
        restored = Tree.from_dict(tree.to_dict(), tree.schema)
        assert restored.signature() == tree.signature()
        assert restored.describe() == tree.describe()
        assert restored.root.stats.rows is None

    def test_attach_restores_training_rows(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        restored = Tree.from_dict(tree.to_dict(), tree.schema).attach(normal_data)
        assert_stats_match_routing(restored, normal_data)

    def test_attach_rejects_other_data(self, normal_data):
        tree = apply_structural_edit(Tree.root_only(normal_data), Grow((), X1_NEGATIVE), normal_data, 5)
        other = make_dataset(normal_data.X[:50], normal_data.claims[:50], schema=numeric_schema("x1", "x2"))
        with pytest.raises(ValueError):
            Tree.from_dict(tree.to_dict(), tree.schema).attach(other)

    def test_categorical_subsets_are_stored_as_labels(self):
        schema = categorical_schema("area", ["A", "B", "C"])
        root = Internal(DecisionRule(0, subset=frozenset({2})), Leaf(_detached(1)), Leaf(_detached(1)), _detached(2))
        payload = Tree(root, schema).to_dict()
        assert payload["subset"] == ["C"]
        assert Tree.from_dict(payload, schema).root.rule.subset == frozenset({2})


def _detached(n: int) -> NodeSuffStats:
    return NodeSuffStats(None, n, 0, float(n))
