"""
Tree proposals for the Metropolis-Hastings search

Five moves: Grow, Prune, Change1 (new cut point on the same variable),
Change2 (new variable and cut point) and Swap (exchange the rules of a
parent-child pair). Retrying a failed draw without replacement until one
fits is the same as drawing uniformly among the options that fit, so every
move draws from its valid options directly and the log proposal ratio is
computed from the option counts of both trees.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from claimcart.core.tree import ChangeRule, Grow, Internal, Path, Prune, SwapRules, Tree, apply_structural_edit
from claimcart.errors import EditRejected
from claimcart.search.prior import RuleTable, SplitCandidateSet, available_variables, draw_rule, rule_log_prob

logger = logging.getLogger(__name__)


class MoveType(Enum):
    """Kinds of tree proposals"""

    GROW = "grow"
    PRUNE = "prune"
    CHANGE1 = "change1"
    CHANGE2 = "change2"
    SWAP = "swap"


MOVES: Tuple[MoveType, ...] = tuple(MoveType)


@dataclass(frozen=True)
class ProposalMix:
    """
    Probabilities of choosing each move.

    Example:
        >>> ProposalMix.preset("E3").change2
        0.0
    """

    grow: float = 0.2
    prune: float = 0.2
    change1: float = 0.2
    change2: float = 0.2
    swap: float = 0.2

    def __post_init__(self) -> None:
        values = self.probabilities()
        if (values < 0.0).any():
            raise ValueError(f"move probabilities must be non-negative, got {values.tolist()}")
        if abs(float(values.sum()) - 1.0) > 1e-12:
            raise ValueError(f"move probabilities must sum to 1, got {float(values.sum())}")

    def probabilities(self) -> np.ndarray:
        return np.array([self.grow, self.prune, self.change1, self.change2, self.swap])

    def probability(self, move: MoveType) -> float:
        return float(getattr(self, move.value))

    def log_probability(self, move: MoveType) -> float:
        p = self.probability(move)
        return math.log(p) if p > 0.0 else -math.inf

    @classmethod
    def uniform(cls) -> "ProposalMix":
        return cls()

    @classmethod
    def preset(cls, name: str) -> "ProposalMix":
        """
        Named mixes with Grow = Prune = 0.2.

        E1 uses Change2 only, E2 Change2 and Swap, E3 Change1 and Swap,
        E4 all three (the uniform mix).
        """
        presets = {
            "uniform": (0.2, 0.2, 0.2),
            "E1": (0.0, 0.6, 0.0),
            "E2": (0.0, 0.3, 0.3),
            "E3": (0.3, 0.0, 0.3),
            "E4": (0.2, 0.2, 0.2),
        }
        try:
            change1, change2, swap = presets[name]
        except KeyError:
            raise ValueError(f"unknown proposal mix {name!r}; expected one of {sorted(presets)}") from None
        return cls(0.2, 0.2, change1, change2, swap)

    def to_dict(self) -> Dict[str, float]:
        return {move.value: self.probability(move) for move in MOVES}


@dataclass(frozen=True)
class Proposal:
    """
    A candidate tree with the log of q(candidate -> current) / q(current -> candidate).

    ``path`` is the root of the only subtree that differs between the trees.
    """

    move: MoveType
    candidate: Tree
    log_q_ratio: float
    path: Path


def propose(
    tree: Tree, mix: ProposalMix, candidates: SplitCandidateSet, rng: np.random.Generator
) -> Tuple[MoveType, Optional[Proposal]]:
    """
    Draw a move type and a candidate tree.

    Returns:
        The drawn move and the proposal, or ``None`` when the move has no
        valid option on this tree
    """
    move = MOVES[int(rng.choice(len(MOVES), p=mix.probabilities()))]
    if move is MoveType.GROW:
        return move, _grow(tree, mix, candidates, rng)
    if move is MoveType.PRUNE:
        return move, _prune(tree, mix, candidates, rng)
    if move is MoveType.SWAP:
        return move, _swap(tree, mix, candidates, rng)
    return move, _change(tree, mix, candidates, rng, move)


def growable(tree: Tree, candidates: SplitCandidateSet) -> List[Path]:
    """Leaves with at least one feasible split."""
    return [path for path, leaf in tree.leaves() if available_variables(candidates.feasible(leaf.stats))]


def change_options(tree: Tree, candidates: SplitCandidateSet, same_variable: bool) -> Dict[Path, RuleTable]:
    """
    Replacement rules per internal node that keep every leaf large enough.

    With ``same_variable`` only cut points of the node's current variable
    count; the node's current rule is never an option.
    """
    key = ("change", same_variable, id(candidates))
    options = tree.cache.get(key)
    if options is None:
        options = {}
        for path, node in tree.internals():
            table = candidates.valid(node)
            variables = [node.rule.variable_index] if same_variable else sorted(table)
            alternatives = {j: [rule for rule in table[j] if rule != node.rule] for j in variables}
            alternatives = {j: rules for j, rules in alternatives.items() if rules}
            if alternatives:
                options[path] = alternatives
        tree.cache[key] = options
    return options


def swap_options(tree: Tree, candidates: SplitCandidateSet) -> List[Tuple[Tuple[Path, Path], Tree]]:
    """Parent-child pairs on different variables whose swap keeps every leaf large enough."""
    key = ("swap", id(candidates))
    options = tree.cache.get(key)
    if options is None:
        options = []
        for parent, child in tree.parent_child_pairs():
            parent_node = tree.node(parent)
            child_node = tree.node(child)
            assert isinstance(parent_node, Internal) and isinstance(child_node, Internal)
            if parent_node.rule.variable_index == child_node.rule.variable_index:
                continue
            try:
                edit = SwapRules(parent, child)
                swapped = apply_structural_edit(tree, edit, candidates.data, candidates.min_node_size)
            except EditRejected:
                continue
            options.append(((parent, child), swapped))
        tree.cache[key] = options
    return options


def _pick(rng: np.random.Generator, n: int) -> int:
    return int(rng.integers(n))


def _grow(tree: Tree, mix: ProposalMix, candidates: SplitCandidateSet, rng: np.random.Generator) -> Optional[Proposal]:
    paths = growable(tree, candidates)
    if not paths:
        return None
    path = paths[_pick(rng, len(paths))]
    leaf = tree.node(path)
    table = candidates.feasible(leaf.stats)
    rule = draw_rule(table, rng)
    if rule is None:
        return None
    try:
        candidate = apply_structural_edit(tree, Grow(path, rule), candidates.data, candidates.min_node_size)
    except EditRejected:
        return None
    log_forward = mix.log_probability(MoveType.GROW) - math.log(len(paths)) + rule_log_prob(table, rule)
    log_reverse = mix.log_probability(MoveType.PRUNE) - math.log(len(candidate.prunable()))
    return Proposal(MoveType.GROW, candidate, log_reverse - log_forward, path)


def _prune(tree: Tree, mix: ProposalMix, candidates: SplitCandidateSet, rng: np.random.Generator) -> Optional[Proposal]:
    paths = tree.prunable()
    if not paths:
        return None
    path = paths[_pick(rng, len(paths))]
    node = tree.node(path)
    assert isinstance(node, Internal)
    candidate = apply_structural_edit(tree, Prune(path), candidates.data, candidates.min_node_size)
    log_forward = mix.log_probability(MoveType.PRUNE) - math.log(len(paths))
    regrowable = growable(candidate, candidates)
    log_reverse = (
        mix.log_probability(MoveType.GROW)
        - math.log(len(regrowable))
        + rule_log_prob(candidates.feasible(node.stats), node.rule)
    )
    return Proposal(MoveType.PRUNE, candidate, log_reverse - log_forward, path)


def _change(
    tree: Tree, mix: ProposalMix, candidates: SplitCandidateSet, rng: np.random.Generator, move: MoveType
) -> Optional[Proposal]:
    same_variable = move is MoveType.CHANGE1
    options = change_options(tree, candidates, same_variable)
    if not options:
        return None
    paths = sorted(options)
    path = paths[_pick(rng, len(paths))]
    table = options[path]
    rule = draw_rule(table, rng)
    old = tree.node(path)
    assert rule is not None and isinstance(old, Internal)
    try:
        candidate = apply_structural_edit(tree, ChangeRule(path, rule), candidates.data, candidates.min_node_size)
    except EditRejected:
        return None
    log_forward = mix.log_probability(move) - math.log(len(paths)) + rule_log_prob(table, rule)
    reverse_options = change_options(candidate, candidates, same_variable)
    if path in reverse_options:
        log_reverse = (
            mix.log_probability(move)
            - math.log(len(reverse_options))
            + rule_log_prob(reverse_options[path], old.rule)
        )
    else:
        log_reverse = -math.inf
    return Proposal(move, candidate, log_reverse - log_forward, path)


def _swap(tree: Tree, mix: ProposalMix, candidates: SplitCandidateSet, rng: np.random.Generator) -> Optional[Proposal]:
    options = swap_options(tree, candidates)
    if not options:
        return None
    (parent, child), candidate = options[_pick(rng, len(options))]
    log_forward = mix.log_probability(MoveType.SWAP) - math.log(len(options))
    reverse = swap_options(candidate, candidates)
    if any(pair == (parent, child) for pair, _ in reverse):
        log_reverse = mix.log_probability(MoveType.SWAP) - math.log(len(reverse))
    else:
        log_reverse = -math.inf
    return Proposal(MoveType.SWAP, candidate, log_reverse - log_forward, parent)
