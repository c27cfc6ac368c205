"""Tree prior, proposals and the Metropolis-Hastings chain"""

from claimcart.search.chain import (
    AcceptanceStats,
    ArchiveEntry,
    ChainConfig,
    ChainState,
    RunResult,
    TreeSampler,
    run,
    step,
)
from claimcart.search.moves import MoveType, Proposal, ProposalMix, propose
from claimcart.search.prior import (
    SplitCandidateSet,
    TreePriorConfig,
    log_tree_prior,
    propose_rule,
    split_probability,
)
from claimcart.search.trace import CsvTraceWriter, TraceBuffer, TraceRecord

__all__ = [
    "TreePriorConfig",
    "SplitCandidateSet",
    "split_probability",
    "log_tree_prior",
    "propose_rule",
    "MoveType",
    "ProposalMix",
    "Proposal",
    "propose",
    "ChainConfig",
    "ChainState",
    "ArchiveEntry",
    "AcceptanceStats",
    "RunResult",
    "TreeSampler",
    "step",
    "run",
    "TraceRecord",
    "TraceBuffer",
    "CsvTraceWriter",
]
