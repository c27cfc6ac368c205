"""
Poisson claims frequency with a conjugate gamma prior
"""

import math
from typing import TYPE_CHECKING, List, Optional

import numpy as np
from scipy.special import gammaln, xlogy

from claimcart.core.params import GammaPriorPair, LatentState, LatentSummary, NodeParams
from claimcart.core.tree import NodeSuffStats
from claimcart.models.base import FamilyKind, GammaShapeRate, NodeModel, _rows, complexity, gamma_log_normaliser

if TYPE_CHECKING:
    from claimcart.data.dataset import Dataset


def poisson_log_pmf(claims: np.ndarray, mean: np.ndarray) -> np.ndarray:
    return xlogy(claims, mean) - mean - gammaln(claims + 1.0)


def poisson_log_marginal(claims: np.ndarray, exposure: np.ndarray, prior: GammaPriorPair) -> float:
    """
    Log of the Poisson likelihood integrated against a Gamma(alpha, beta) rate.

    Example:
        >>> round(math.exp(poisson_log_marginal(np.array([1]), np.array([1.0]),
        ...                                     GammaPriorPair(1.0, 1.0))), 6)
        0.25
    """
    alpha, beta = prior.alpha, prior.beta
    total = float(claims.sum())
    return (
        alpha * math.log(beta)
        - math.lgamma(alpha)
        + float(xlogy(claims, exposure).sum())
        - float(gammaln(claims + 1.0).sum())
        + gamma_log_normaliser(total + alpha, float(exposure.sum()) + beta)
    )


class PoissonModel(NodeModel):
    """Claims N ~ Poisson(λv) with λ ~ Gamma(alpha, beta)"""

    kind = FamilyKind.POISSON

    def log_pmf(self, params: NodeParams, claims: np.ndarray, exposure: np.ndarray) -> np.ndarray:
        return poisson_log_pmf(np.asarray(claims, dtype=np.float64), params.lam * np.asarray(exposure))

    def log_marginal(self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState] = None) -> float:
        rows = _rows(stats)
        return poisson_log_marginal(data.claims[rows], data.exposure[rows], self.prior)

    def posterior(self, stats: NodeSuffStats, data: "Dataset", summary: LatentSummary) -> List[GammaShapeRate]:
        return [(stats.sum_claims + self.prior.alpha, stats.sum_exposure + self.prior.beta)]

    def _params(self, stats: NodeSuffStats, data: "Dataset", values: List[float]) -> NodeParams:
        return NodeParams(lam=values[0])

    def effective_params(self, stats: NodeSuffStats, summary: LatentSummary) -> float:
        return complexity(stats.sum_claims, self.prior.alpha)

    def expected_count(self, params: NodeParams, exposure: np.ndarray) -> np.ndarray:
        return params.lam * np.asarray(exposure, dtype=np.float64)

    def node_variance(self, params: NodeParams) -> float:
        return params.lam
