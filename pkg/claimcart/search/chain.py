"""
Metropolis-Hastings search over trees

Each iteration proposes a tree, refreshes the latents of the affected rows
(augmented families), accepts or rejects with the node parameters
integrated out, and redraws the parameters of the affected leaves.
Independent restarts start from the root-only tree.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from claimcart.core.params import GammaPriorPair, LatentState, LatentSummary, NodeParams
from claimcart.core.schema import CovariateSchema
from claimcart.core.tree import Internal, Leaf, Node, Path, Tree
from claimcart.data.dataset import Dataset
from claimcart.models import FamilyKind, NodeModel, default_prior, make_family
from claimcart.search.moves import MOVES, Proposal, ProposalMix, propose
from claimcart.search.prior import SplitCandidateSet, TreePriorConfig, log_tree_prior
from claimcart.search.trace import TraceBuffer, TraceRecord

logger = logging.getLogger(__name__)


@dataclass
class ChainConfig:
    """
    Settings of one Metropolis-Hastings run.

    Args:
        iterations: Iterations per restart
        burn_in: Leading iterations of each restart left out of the archive
        restarts: Number of independent chains
        proposal_mix: Move probabilities
        prior: Tree prior and split-space settings
        family: Response family
        seed: Base seed; restart r uses the stream seeded by (seed, r)
        hyper: Gamma prior of the node parameters, derived from the data when None
        prior_beta: Rate used when deriving ``hyper`` from the data
        kappa_max: Dispersion used where the moment estimate is undefined
        workers: Processes used to run restarts
        progress: Show a progress bar per restart
    """

    iterations: int = 10_000
    burn_in: int = 2_000
    restarts: int = 3
    proposal_mix: ProposalMix = field(default_factory=ProposalMix.uniform)
    prior: TreePriorConfig = field(default_factory=TreePriorConfig)
    family: FamilyKind = FamilyKind.POISSON
    seed: int = 0
    hyper: Optional[GammaPriorPair] = None
    prior_beta: float = 0.8
    kappa_max: float = 1e6
    workers: int = 1
    progress: bool = False

    def __post_init__(self) -> None:
        self.family = FamilyKind(self.family)
        if self.iterations < 1:
            raise ValueError(f"iterations must be positive, got {self.iterations}")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(f"burn_in must lie in [0, iterations), got {self.burn_in}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be at least 1, got {self.restarts}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")


@dataclass
class ChainState:
    """Current tree, leaf parameters keyed by leaf path, latents and random stream"""

    tree: Tree
    params: Dict[Path, NodeParams]
    latents: Optional[LatentState]
    rng: np.random.Generator
    iteration: int = 0
    restart: int = 0


@dataclass
class AcceptanceStats:
    """Per-move proposal and acceptance counts after burn-in"""

    proposed: Dict[str, int] = field(default_factory=lambda: {move.value: 0 for move in MOVES})
    accepted: Dict[str, int] = field(default_factory=lambda: {move.value: 0 for move in MOVES})

    def record(self, move: str, accepted: bool) -> None:
        self.proposed[move] += 1
        self.accepted[move] += int(accepted)

    def merge(self, other: "AcceptanceStats") -> None:
        for move in other.proposed:
            self.proposed[move] = self.proposed.get(move, 0) + other.proposed[move]
            self.accepted[move] = self.accepted.get(move, 0) + other.accepted[move]

    def rate(self, move: str) -> float:
        return self.accepted[move] / self.proposed[move] if self.proposed[move] else 0.0

    @property
    def overall_rate(self) -> float:
        total = sum(self.proposed.values())
        return sum(self.accepted.values()) / total if total else 0.0


@dataclass
class ArchiveEntry:
    """
    An accepted post-burn-in tree.

    ``tree`` carries posterior-mean leaf parameters; ``summaries`` holds the
    latent aggregates of each leaf at acceptance (augmented families only).
    """

    restart: int
    iteration: int
    tree: Tree
    log_data_lik: float
    log_marginal: float
    n_leaves: int
    usage: Tuple[int, ...]
    summaries: Dict[Path, LatentSummary] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        leaf_paths = [path for path, _ in self.tree.leaves()]
        return {
            "restart": self.restart,
            "iteration": self.iteration,
            "log_data_lik": self.log_data_lik,
            "log_marginal": self.log_marginal,
            "n_leaves": self.n_leaves,
            "usage": list(self.usage),
            "summaries": [self.summaries[path].to_dict() for path in leaf_paths] if self.summaries else [],
            "tree": self.tree.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], schema: CovariateSchema) -> "ArchiveEntry":
        tree = Tree.from_dict(data["tree"], schema)
        leaf_paths = [path for path, _ in tree.leaves()]
        summaries = {path: LatentSummary.from_dict(s) for path, s in zip(leaf_paths, data.get("summaries", []))}
        return cls(
            restart=int(data["restart"]),
            iteration=int(data["iteration"]),
            tree=tree,
            log_data_lik=float(data["log_data_lik"]),
            log_marginal=float(data["log_marginal"]),
            n_leaves=int(data["n_leaves"]),
            usage=tuple(int(u) for u in data["usage"]),
            summaries=summaries,
        )


@dataclass
class RunResult:
    """Trace, archive and acceptance counts of all restarts, ordered by (restart, iteration)"""

    trace: List[TraceRecord]
    archive: List[ArchiveEntry]
    acceptance: AcceptanceStats

    def variable_usage_totals(self) -> np.ndarray:
        if not self.archive:
            return np.zeros(0, dtype=np.int64)
        return np.sum([entry.usage for entry in self.archive], axis=0)


def subtree_leaves(node: Node, path: Path = ()) -> List[Tuple[Path, Leaf]]:
    if isinstance(node, Leaf):
        return [(path, node)]
    assert isinstance(node, Internal)
    return subtree_leaves(node.left, path + (0,)) + subtree_leaves(node.right, path + (1,))


class TreeSampler:
    """
    Runs the tree search for one family on one training set.

    Example:
        >>> sampler = TreeSampler(ChainConfig(iterations=500, burn_in=100, restarts=1), data)
        >>> result = sampler.run()
        >>> len(result.trace)
        500
    """

    def __init__(
        self,
        config: ChainConfig,
        data: Dataset,
        candidates: Optional[SplitCandidateSet] = None,
        model: Optional[NodeModel] = None,
    ):
        self.config = config
        self.data = data
        self.candidates = candidates or SplitCandidateSet.from_data(data, config.prior)
        hyper = config.hyper or default_prior(data, beta=config.prior_beta)
        self.model = model or make_family(config.family, hyper, config.kappa_max)

    # Likelihood pieces

    def leaf_log_marginal(self, leaf: Leaf, latents: Optional[LatentState]) -> float:
        if self.model.augmented:
            return self.model.log_marginal(leaf.stats, self.data, latents)
        key = ("marginal", id(self.model))
        if key not in leaf.stats.cache:
            leaf.stats.cache[key] = self.model.log_marginal(leaf.stats, self.data)
        return leaf.stats.cache[key]

    def log_marginal(self, tree: Tree, latents: Optional[LatentState]) -> float:
        return sum(self.leaf_log_marginal(leaf, latents) for _, leaf in tree.leaves())

    def log_prior(self, tree: Tree) -> float:
        key = ("prior", id(self.candidates), self.config.prior)
        if key not in tree.cache:
            tree.cache[key] = log_tree_prior(tree, self.candidates, self.config.prior)
        return tree.cache[key]

    def posterior_means(self, tree: Tree, latents: Optional[LatentState]) -> Dict[Path, NodeParams]:
        return {path: self.model.posterior_mean(leaf.stats, self.data, latents) for path, leaf in tree.leaves()}

    def log_data_likelihood(self, tree: Tree, latents: Optional[LatentState]) -> float:
        """Log likelihood of the training data at the leaves' posterior means."""
        return sum(
            self.model.log_data_likelihood(
                self.model.posterior_mean(leaf.stats, self.data, latents), leaf.stats, self.data
            )
            for _, leaf in tree.leaves()
        )

    def acceptance_log_ratio(self, tree: Tree, proposal: Proposal, latents: Optional[LatentState]) -> float:
        """
        log of the Metropolis-Hastings acceptance probability.

        Only the leaves below the edited node enter the marginal difference;
        everything else is shared by both trees.
        """
        if proposal.log_q_ratio == -math.inf:
            return -math.inf
        log_prior_candidate = self.log_prior(proposal.candidate)
        if log_prior_candidate == -math.inf:
            return -math.inf
        old = subtree_leaves(tree.node(proposal.path))
        new = subtree_leaves(proposal.candidate.node(proposal.path))
        delta = sum(self.leaf_log_marginal(leaf, latents) for _, leaf in new) - sum(
            self.leaf_log_marginal(leaf, latents) for _, leaf in old
        )
        return min(0.0, proposal.log_q_ratio + delta + log_prior_candidate - self.log_prior(tree))

    # Chain

    def initial_state(self, restart: int) -> ChainState:
        rng = np.random.default_rng([self.config.seed, restart])
        tree = Tree.root_only(self.data)
        latents = self.model.init_latents(self.data)
        stats = tree.root.stats
        params = self.model.posterior_mean(stats, self.data, latents)
        if latents is not None:
            self.model.sample_latents(params, stats, self.data, latents, rng)
            params = self.model.sample_params(stats, self.data, latents, rng)
        return ChainState(tree, {(): params}, latents, rng, 0, restart)

    def step(self, state: ChainState) -> Tuple[ChainState, TraceRecord, bool]:
        """
        One iteration: propose, refresh latents, accept or reject, redraw parameters.

        A move without valid options counts as a rejection and refreshes the
        whole tree's latents and parameters.

        Returns:
            The next state, its trace record and whether a candidate was accepted
        """
        rng = state.rng
        tree = state.tree
        latents = state.latents.copy() if state.latents is not None else None
        move, proposal = propose(tree, self.config.proposal_mix, self.candidates, rng)
        region: Path = proposal.path if proposal is not None else ()

        if latents is not None:
            for path, leaf in subtree_leaves(tree.node(region), region):
                self.model.sample_latents(state.params[path], leaf.stats, self.data, latents, rng)

        accepted = False
        if proposal is not None:
            log_alpha = self.acceptance_log_ratio(tree, proposal, latents)
            u = rng.random()
            accepted = log_alpha > -math.inf and u < math.exp(log_alpha)
            if accepted:
                tree = proposal.candidate

        depth = len(region)
        params = {path: value for path, value in state.params.items() if path[:depth] != region}
        for path, leaf in subtree_leaves(tree.node(region), region):
            params[path] = self.model.sample_params(leaf.stats, self.data, latents, rng)

        iteration = state.iteration + 1
        record = TraceRecord(
            restart=state.restart,
            iteration=iteration,
            move=move.value,
            accepted=accepted,
            n_leaves=tree.n_leaves,
            log_marginal=self.log_marginal(tree, latents),
            log_data_lik=self.log_data_likelihood(tree, latents),
            usage=tuple(int(u) for u in tree.variable_usage()),
        )
        logger.debug(
            "restart %d iteration %d %s accepted=%s leaves=%d",
            state.restart,
            iteration,
            move.value,
            accepted,
            record.n_leaves,
        )
        return ChainState(tree, params, latents, rng, iteration, state.restart), record, accepted

    def archive_entry(self, state: ChainState, record: TraceRecord) -> ArchiveEntry:
        tree = state.tree
        summaries = {}
        if self.model.augmented:
            summaries = {
                path: self.model.summarize(leaf.stats, self.data, state.latents) for path, leaf in tree.leaves()
            }
        return ArchiveEntry(
            restart=state.restart,
            iteration=state.iteration,
            tree=tree.with_params(self.posterior_means(tree, state.latents)),
            log_data_lik=record.log_data_lik,
            log_marginal=record.log_marginal,
            n_leaves=record.n_leaves,
            usage=record.usage,
            summaries=summaries,
        )

    def run_restart(
        self, restart: int, trace: Optional[TraceBuffer] = None
    ) -> Tuple[List[TraceRecord], List[ArchiveEntry], AcceptanceStats]:
        state = self.initial_state(restart)
        records: List[TraceRecord] = []
        archive: List[ArchiveEntry] = []
        acceptance = AcceptanceStats()
        logger.info("Restart %d: %s chain, %d iterations", restart, self.model.kind.value, self.config.iterations)
        iterations = tqdm(
            range(self.config.iterations), desc=f"restart {restart}", disable=not self.config.progress, leave=False
        )
        for _ in iterations:
            state, record, accepted = self.step(state)
            records.append(record)
            if trace is not None:
                trace.append(record)
            if state.iteration > self.config.burn_in:
                acceptance.record(record.move, accepted)
                if accepted:
                    archive.append(self.archive_entry(state, record))
        logger.info(
            "Restart %d finished: %d leaves, %d archived trees, acceptance %.2f%%",
            restart,
            state.tree.n_leaves,
            len(archive),
            100.0 * acceptance.overall_rate,
        )
        return records, archive, acceptance

    def run(self, trace: Optional[TraceBuffer] = None) -> RunResult:
        """Run every restart and merge the results in restart order."""
        results = []
        if self.config.workers > 1 and self.config.restarts > 1:
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                jobs = [(self.config, self.data, restart) for restart in range(self.config.restarts)]
                results = list(pool.map(_run_restart_job, jobs))
            if trace is not None:
                for records, _, _ in results:
                    trace.extend(records)
        else:
            results = [self.run_restart(restart, trace) for restart in range(self.config.restarts)]
        if trace is not None:
            trace.flush()

        acceptance = AcceptanceStats()
        all_records: List[TraceRecord] = []
        archive: List[ArchiveEntry] = []
        for records, entries, stats in results:
            all_records.extend(records)
            archive.extend(entries)
            acceptance.merge(stats)
        return RunResult(all_records, archive, acceptance)


def _run_restart_job(
    job: Tuple[ChainConfig, Dataset, int]
) -> Tuple[List[TraceRecord], List[ArchiveEntry], AcceptanceStats]:
    config, data, restart = job
    return TreeSampler(config, data).run_restart(restart)


def step(state: ChainState, sampler: TreeSampler) -> Tuple[ChainState, TraceRecord]:
    """One chain iteration; see TreeSampler.step."""
    new_state, record, _ = sampler.step(state)
    return new_state, record


def run(
    config: ChainConfig,
    data: Dataset,
    candidates: Optional[SplitCandidateSet] = None,
    trace: Optional[TraceBuffer] = None,
) -> RunResult:
    """Run all restarts of a chain configuration on a training set."""
    return TreeSampler(config, data, candidates).run(trace)
