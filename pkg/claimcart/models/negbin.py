"""
Negative-binomial claims frequency

NB1 keeps the dispersion κ per observation; NB2 scales it with exposure,
giving a fixed over-dispersion. In both, κ is a moment estimate per leaf
and λ is integrated out after augmenting each row with ξ.
"""

import logging
import math
from typing import TYPE_CHECKING, List, Optional

import numpy as np
from scipy.special import gammaln, xlogy

from claimcart.core.params import LatentState, LatentSummary, NodeParams
from claimcart.core.tree import NodeSuffStats
from claimcart.errors import EstimationError
from claimcart.models.base import FamilyKind, GammaShapeRate, NodeModel, _rows, complexity, gamma_log_normaliser

if TYPE_CHECKING:
    from claimcart.data.dataset import Dataset

logger = logging.getLogger(__name__)


def estimate_kappa(mode: FamilyKind, claims: np.ndarray, exposure: np.ndarray, kappa_max: float = 1e6) -> float:
    """
    Moment estimate of the dispersion κ of one node.

    Under- or equi-dispersed nodes return ``kappa_max``, the Poisson limit.

    Raises:
        EstimationError: With fewer than two observations
    """
    n = claims.size
    if n < 2:
        raise EstimationError(f"dispersion needs at least 2 observations, got {n}")
    total_exposure = float(exposure.sum())
    lam = float(claims.sum()) / total_exposure
    variance = float(np.sum(exposure * (claims / exposure - lam) ** 2)) / (n - 1)
    if variance <= lam:
        logger.warning(
            "Node of %d rows is not over-dispersed (variance %.4g, mean %.4g); using kappa_max=%g",
            n,
            variance,
            lam,
            kappa_max,
        )
        return kappa_max
    kappa = lam * lam / (variance - lam)
    if mode is FamilyKind.NB1:
        kappa *= (total_exposure - float(np.sum(exposure**2)) / total_exposure) / (n - 1)
    return min(kappa, kappa_max)


class NegativeBinomialModel(NodeModel):
    """
    Claims N ~ NB(κ, λ) with λ ~ Gamma(alpha, beta) and κ estimated per leaf.

    Args:
        prior: Gamma prior of λ
        kappa_max: Dispersion used where the moment estimate is undefined
        mode: FamilyKind.NB1 or FamilyKind.NB2
    """

    augmented = True

    def __init__(self, prior, kappa_max: float = 1e6, mode: FamilyKind = FamilyKind.NB1):
        if mode not in (FamilyKind.NB1, FamilyKind.NB2):
            raise ValueError(f"not a negative-binomial mode: {mode}")
        super().__init__(prior, kappa_max)
        self.kind = mode

    def kappa(self, stats: NodeSuffStats, data: "Dataset") -> float:
        """Cached dispersion estimate of a node's row set."""
        key = ("kappa", self.kind, self.kappa_max)
        if key not in stats.cache:
            rows = _rows(stats)
            try:
                stats.cache[key] = estimate_kappa(self.kind, data.claims[rows], data.exposure[rows], self.kappa_max)
            except EstimationError as exc:
                logger.warning("Falling back to kappa_max=%g: %s", self.kappa_max, exc)
                stats.cache[key] = self.kappa_max
        return stats.cache[key]

    def _shape(self, kappa: float, exposure: np.ndarray) -> np.ndarray:
        """Per-row gamma shape of the augmenting ξ: κ for NB1, κv for NB2."""
        if self.kind is FamilyKind.NB1:
            return np.full(exposure.shape, kappa)
        return kappa * exposure

    def log_pmf(self, params: NodeParams, claims: np.ndarray, exposure: np.ndarray) -> np.ndarray:
        claims = np.asarray(claims, dtype=np.float64)
        exposure = np.asarray(exposure, dtype=np.float64)
        kappa = params.kappa
        if self.kind is FamilyKind.NB1:
            size = np.full(exposure.shape, kappa)
            odds = params.lam * exposure / kappa
        else:
            size = kappa * exposure
            odds = np.full(exposure.shape, params.lam / kappa)
        return (
            gammaln(claims + size)
            - gammaln(size)
            - gammaln(claims + 1.0)
            - size * np.log1p(odds)
            + xlogy(claims, odds)
            - claims * np.log1p(odds)
        )

    def log_marginal(self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState] = None) -> float:
        if latents is None or latents.xi is None:
            raise ValueError("negative-binomial marginal needs the ξ latents")
        rows = _rows(stats)
        claims = data.claims[rows].astype(np.float64)
        exposure = data.exposure[rows]
        xi = latents.xi[rows]
        shape = self._shape(self.kappa(stats, data), exposure)
        per_row = (
            xlogy(shape, shape)
            - gammaln(shape)
            + xlogy(claims, exposure)
            - gammaln(claims + 1.0)
            + (shape + claims - 1.0) * np.log(xi)
            - xi * shape
        )
        alpha, beta = self.prior.alpha, self.prior.beta
        return (
            float(per_row.sum())
            + alpha * math.log(beta)
            - math.lgamma(alpha)
            + gamma_log_normaliser(stats.sum_claims + alpha, float(np.dot(xi, exposure)) + beta)
        )

    def init_latents(self, data: "Dataset") -> LatentState:
        return LatentState(xi=np.ones(data.n))

    def sample_latents(
        self, params: NodeParams, stats: NodeSuffStats, data: "Dataset", latents: LatentState, rng: np.random.Generator
    ) -> None:
        rows = _rows(stats)
        exposure = data.exposure[rows]
        shape = self._shape(params.kappa, exposure)
        latents.xi[rows] = rng.gamma(shape + data.claims[rows], 1.0 / (shape + params.lam * exposure))

    def summarize(self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState]) -> LatentSummary:
        if latents is None or latents.xi is None:
            raise ValueError("negative-binomial posterior needs the ξ latents")
        rows = _rows(stats)
        return LatentSummary(xi_exposure=float(np.dot(latents.xi[rows], data.exposure[rows])))

    def posterior(self, stats: NodeSuffStats, data: "Dataset", summary: LatentSummary) -> List[GammaShapeRate]:
        return [(stats.sum_claims + self.prior.alpha, summary.xi_exposure + self.prior.beta)]

    def _params(self, stats: NodeSuffStats, data: "Dataset", values: List[float]) -> NodeParams:
        return NodeParams(lam=values[0], kappa=self.kappa(stats, data))

    def effective_params(self, stats: NodeSuffStats, summary: LatentSummary) -> float:
        # one for κ
        return 1.0 + complexity(stats.sum_claims, self.prior.alpha)

    def expected_count(self, params: NodeParams, exposure: np.ndarray) -> np.ndarray:
        return params.lam * np.asarray(exposure, dtype=np.float64)

    def node_variance(self, params: NodeParams) -> float:
        return params.lam * (1.0 + params.lam / params.kappa)
