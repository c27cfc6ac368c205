"""Tests for the tree proposals and their proposal ratios"""

import math

import numpy as np
import pytest

from conftest import make_dataset

from claimcart.core.tree import DecisionRule, Grow, Tree, apply_structural_edit
from claimcart.search.moves import MoveType, ProposalMix, change_options, growable, propose, swap_options
from claimcart.search.prior import SplitCandidateSet, TreePriorConfig, rule_log_prob

ONLY_PRUNE = ProposalMix(grow=0.0, prune=1.0, change1=0.0, change2=0.0, swap=0.0)
ONLY_SWAP = ProposalMix(grow=0.0, prune=0.0, change1=0.0, change2=0.0, swap=1.0)


def draw(tree, mix, candidates, move, seed=0, attempts=200):
    """First proposal of the requested move type."""
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        drawn, proposal = propose(tree, mix, candidates, rng)
        if drawn is move:
            return proposal
    raise AssertionError(f"{move} was never drawn")


class TestProposalMix:
    def test_presets(self):
        assert ProposalMix.preset("uniform") == ProposalMix()
        assert ProposalMix.preset("E1").to_dict() == {
            "grow": 0.2,
            "prune": 0.2,
            "change1": 0.0,
            "change2": 0.6,
            "swap": 0.0,
        }
        assert ProposalMix.preset("E3").change2 == 0.0
        assert ProposalMix.preset("E4") == ProposalMix.uniform()

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            ProposalMix(grow=0.5, prune=0.5, change1=0.5, change2=0.0, swap=0.0)
        with pytest.raises(ValueError):
            ProposalMix.preset("E9")


class TestNoOps:
    def test_prune_on_root_only_tree(self, binary_data):
        candidates = SplitCandidateSet.from_data(binary_data, TreePriorConfig(min_node_size=10))
        move, proposal = propose(Tree.root_only(binary_data), ONLY_PRUNE, candidates, np.random.default_rng(0))
        assert move is MoveType.PRUNE
        assert proposal is None

    def test_swap_on_same_variable_pair(self):
        data = make_dataset(np.arange(200.0), np.zeros(200, dtype=int))
        candidates = SplitCandidateSet.from_data(data, TreePriorConfig(min_node_size=10))
        tree = apply_structural_edit(Tree.root_only(data), Grow((), DecisionRule(0, threshold=100.0)), data, 10)
        tree = apply_structural_edit(tree, Grow((0,), DecisionRule(0, threshold=50.0)), data, 10)
        assert swap_options(tree, candidates) == []
        move, proposal = propose(tree, ONLY_SWAP, candidates, np.random.default_rng(0))
        assert move is MoveType.SWAP
        assert proposal is None


class TestProposalRatios:
    def test_grow_from_the_root_with_one_feasible_rule(self, binary_data):
        mix = ProposalMix(grow=0.5, prune=0.3, change1=0.1, change2=0.1, swap=0.0)
        candidates = SplitCandidateSet.from_data(binary_data, TreePriorConfig(min_node_size=10))
        proposal = draw(Tree.root_only(binary_data), mix, candidates, MoveType.GROW)
        assert proposal.candidate.n_leaves == 2
        assert proposal.path == ()
        assert proposal.log_q_ratio == pytest.approx(math.log(0.3 / 0.5))

    def test_prune_is_the_reciprocal_of_grow(self, binary_data):
        mix = ProposalMix(grow=0.5, prune=0.3, change1=0.1, change2=0.1, swap=0.0)
        candidates = SplitCandidateSet.from_data(binary_data, TreePriorConfig(min_node_size=10))
        grow = draw(Tree.root_only(binary_data), mix, candidates, MoveType.GROW)
        prune = draw(grow.candidate, mix, candidates, MoveType.PRUNE, seed=1)
        assert prune.candidate.n_leaves == 1
        assert prune.log_q_ratio == pytest.approx(-grow.log_q_ratio)

    def test_grow_and_prune_reciprocal_on_larger_trees(self, normal_data):
        candidates = SplitCandidateSet.from_data(normal_data, TreePriorConfig(min_node_size=10))
        mix = ProposalMix()
        rng = np.random.default_rng(8)
        tree = Tree.root_only(normal_data)
        checked = 0
        for _ in range(60):
            move, proposal = propose(tree, mix, candidates, rng)
            if move is MoveType.GROW and proposal is not None:
                grown = proposal.candidate
                reverse = [p for p in grown.prunable() if p == proposal.path]
                assert reverse, "the grown node must be prunable"
                # both directions recomputed from the option counts
                forward = math.log(0.2) - math.log(len(growable(tree, candidates)))
                forward += rule_log_prob(
                    candidates.feasible(tree.node(proposal.path).stats), grown.node(proposal.path).rule
                )
                backward = math.log(0.2) - math.log(len(grown.prunable()))
                assert proposal.log_q_ratio == pytest.approx(backward - forward)
                checked += 1
                tree = grown
        assert checked > 0

    def test_change_keeps_the_variable_for_change1(self, normal_data):
        candidates = SplitCandidateSet.from_data(normal_data, TreePriorConfig(min_node_size=10))
        root = Tree.root_only(normal_data)
        grid_rules = candidates.feasible(root.root.stats)[0]
        tree = apply_structural_edit(root, Grow((), grid_rules[len(grid_rules) // 2]), normal_data, 10)
        options = change_options(tree, candidates, same_variable=True)
        assert set(options[()]) == {0}
        assert all(rule != tree.root.rule for rule in options[()][0])
        mix = ProposalMix(grow=0.0, prune=0.0, change1=1.0, change2=0.0, swap=0.0)
        proposal = draw(tree, mix, candidates, MoveType.CHANGE1)
        assert proposal.candidate.root.rule.variable_index == 0
        assert proposal.candidate.root.rule != tree.root.rule
        # one internal node with the same number of options both ways
        assert proposal.log_q_ratio == pytest.approx(0.0)
