"""
Base class for claimcart response families

A family supplies the node likelihood, its integrated (or augmented and
integrated) form, the gamma full conditionals, the DIC pieces and the
node-level predictions. Everything is evaluated on the rows of one node.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, ClassVar, List, Optional, Tuple

import numpy as np
from scipy.special import digamma

from claimcart.core.params import GammaPriorPair, LatentState, LatentSummary, NodeParams
from claimcart.core.tree import NodeSuffStats

if TYPE_CHECKING:
    from claimcart.data.dataset import Dataset

GammaShapeRate = Tuple[float, float]


class FamilyKind(Enum):
    """Response family and its exposure handling"""

    POISSON = "poisson"
    NB1 = "nb1"
    NB2 = "nb2"
    ZIP1 = "zip1"
    ZIP2 = "zip2"


@dataclass(frozen=True)
class NodeDic:
    """Deviance at the posterior mean, effective parameters and DIC of one leaf"""

    deviance: float
    effective_params: float
    dic: float


class NodeModel(ABC):
    """
    Base class for all response families.

    Subclasses implement the pmf, the node marginal and the posterior
    shape/rate pairs; sampling, posterior means and DIC follow from those.

    Example:
        >>> model = make_family(FamilyKind.POISSON, GammaPriorPair(1.0, 1.0))
        >>> round(float(model.log_pmf(NodeParams(1.0), np.array([0]), np.array([1.0]))[0]), 6)
        -1.0
    """

    kind: ClassVar[FamilyKind]
    augmented: ClassVar[bool] = False

    def __init__(self, prior: GammaPriorPair, kappa_max: float = 1e6):
        self.prior = prior
        self.kappa_max = kappa_max

    @abstractmethod
    def log_pmf(self, params: NodeParams, claims: np.ndarray, exposure: np.ndarray) -> np.ndarray:
        """Elementwise log probability of ``claims`` at the given exposures."""

    @abstractmethod
    def log_marginal(self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState] = None) -> float:
        """Log likelihood of the node's rows with the node parameters integrated out."""

    @abstractmethod
    def posterior(self, stats: NodeSuffStats, data: "Dataset", summary: LatentSummary) -> List[GammaShapeRate]:
        """Gamma (shape, rate) full conditionals, λ first then μ when present."""

    @abstractmethod
    def _params(self, stats: NodeSuffStats, data: "Dataset", values: List[float]) -> NodeParams:
        """Wrap posterior draws or means as NodeParams."""

    @abstractmethod
    def effective_params(self, stats: NodeSuffStats, summary: LatentSummary) -> float:
        """The DIC complexity term of one leaf."""

    @abstractmethod
    def expected_count(self, params: NodeParams, exposure: np.ndarray) -> np.ndarray:
        """Expected claim counts at the given exposures."""

    @abstractmethod
    def node_variance(self, params: NodeParams) -> float:
        """Variance of the unit-exposure claims frequency."""

    def node_frequency(self, params: NodeParams) -> float:
        """Expected claims per unit exposure."""
        return float(self.expected_count(params, np.ones(1))[0])

    # Latents

    def init_latents(self, data: "Dataset") -> Optional[LatentState]:
        return None

    def sample_latents(
        self, params: NodeParams, stats: NodeSuffStats, data: "Dataset", latents: LatentState, rng: np.random.Generator
    ) -> None:
        """Redraw the latents of the node's rows in place."""

    def summarize(self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState]) -> LatentSummary:
        return LatentSummary()

    # Posterior

    def sample_params(
        self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState], rng: np.random.Generator
    ) -> NodeParams:
        """Draw node parameters from their gamma full conditionals."""
        pairs = self.posterior(stats, data, self.summarize(stats, data, latents))
        return self._params(stats, data, [float(rng.gamma(shape, 1.0 / rate)) for shape, rate in pairs])

    def posterior_mean(
        self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState] = None,
        summary: Optional[LatentSummary] = None,
    ) -> NodeParams:
        if summary is None:
            summary = self.summarize(stats, data, latents)
        return self._params(stats, data, [shape / rate for shape, rate in self.posterior(stats, data, summary)])

    # Goodness of fit

    def log_data_likelihood(self, params: NodeParams, stats: NodeSuffStats, data: "Dataset") -> float:
        rows = _rows(stats)
        return float(self.log_pmf(params, data.claims[rows], data.exposure[rows]).sum())

    def node_dic(
        self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState] = None,
        summary: Optional[LatentSummary] = None,
    ) -> NodeDic:
        """
        Deviance at the posterior mean plus twice the effective parameters.

        The deviance uses the family's own pmf with the latents integrated out.
        """
        if summary is None:
            summary = self.summarize(stats, data, latents)
        mean = self.posterior_mean(stats, data, summary=summary)
        deviance = -2.0 * self.log_data_likelihood(mean, stats, data)
        effective = self.effective_params(stats, summary)
        return NodeDic(deviance, effective, deviance + 2.0 * effective)


def _rows(stats: NodeSuffStats) -> np.ndarray:
    if stats.rows is None:
        raise ValueError("node is detached from its training data")
    return stats.rows


def gamma_log_normaliser(shape: float, rate: float) -> float:
    """log of the gamma integral Γ(shape) / rate**shape."""
    return math.lgamma(shape) - shape * math.log(rate)


def complexity(total: float, shape_offset: float) -> float:
    """2 (log(total + a) - ψ(total + a)) total, the per-rate DIC penalty."""
    shape = total + shape_offset
    return 2.0 * (math.log(shape) - float(digamma(shape))) * total
