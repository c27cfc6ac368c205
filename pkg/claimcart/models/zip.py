"""
Zero-inflated Poisson claims frequency

A zero comes from the point mass with probability 1/(1 + μ) and from the
Poisson part otherwise. ZIP1 puts the exposure into the Poisson mean,
ZIP2 into the zero-mass odds. Each row carries a Bernoulli δ (Poisson part
or point mass) and an exponential φ, which make μ and λ conditionally
conjugate with independent gamma priors.
"""

import math
from typing import TYPE_CHECKING, List, Optional

import numpy as np
from scipy.special import expit, gammaln, xlogy

from claimcart.core.params import LatentState, LatentSummary, NodeParams
from claimcart.core.tree import NodeSuffStats
from claimcart.models.base import FamilyKind, GammaShapeRate, NodeModel, _rows, complexity, gamma_log_normaliser
from claimcart.models.poisson import poisson_log_pmf

if TYPE_CHECKING:
    from claimcart.data.dataset import Dataset


class ZeroInflatedPoissonModel(NodeModel):
    """
    Claims N ~ ZIP(μ, λ) with μ ~ Gamma(alpha1, beta1) and λ ~ Gamma(alpha, beta).

    Args:
        prior: Gamma priors of λ (alpha, beta) and μ (alpha1, beta1)
        kappa_max: Unused, kept for a uniform constructor
        mode: FamilyKind.ZIP1 or FamilyKind.ZIP2
    """

    augmented = True

    def __init__(self, prior, kappa_max: float = 1e6, mode: FamilyKind = FamilyKind.ZIP1):
        if mode not in (FamilyKind.ZIP1, FamilyKind.ZIP2):
            raise ValueError(f"not a zero-inflated mode: {mode}")
        super().__init__(prior, kappa_max)
        self.kind = mode

    def _odds_and_mean(self, params: NodeParams, exposure: np.ndarray):
        """Zero-mass odds μ (or μv) and Poisson mean λv (or λ) per row."""
        if self.kind is FamilyKind.ZIP1:
            return np.full(exposure.shape, params.mu), params.lam * exposure
        return params.mu * exposure, np.full(exposure.shape, params.lam)

    def log_pmf(self, params: NodeParams, claims: np.ndarray, exposure: np.ndarray) -> np.ndarray:
        claims = np.asarray(claims, dtype=np.float64)
        odds, mean = self._odds_and_mean(params, np.asarray(exposure, dtype=np.float64))
        log_odds = np.log(odds)
        zero = np.logaddexp(0.0, log_odds - mean)
        positive = log_odds + poisson_log_pmf(claims, mean)
        return np.where(claims == 0, zero, positive) - np.log1p(odds)

    def log_marginal(self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState] = None) -> float:
        if latents is None or latents.delta is None or latents.phi is None:
            raise ValueError("zero-inflated marginal needs the δ and φ latents")
        rows = _rows(stats)
        claims = data.claims[rows].astype(np.float64)
        exposure = data.exposure[rows]
        delta = latents.delta[rows].astype(np.float64)
        phi = latents.phi[rows]
        if self.kind is FamilyKind.ZIP1:
            per_row = -phi + delta * (xlogy(claims, exposure) - gammaln(claims + 1.0))
        else:
            per_row = -phi + delta * (np.log(exposure) - gammaln(claims + 1.0))
        summary = self._summary(claims, exposure, delta, phi)
        prior = self.prior
        return (
            float(per_row.sum())
            + prior.alpha1 * math.log(prior.beta1)
            - math.lgamma(prior.alpha1)
            + gamma_log_normaliser(summary.delta + prior.alpha1, summary.phi_weight + prior.beta1)
            + prior.alpha * math.log(prior.beta)
            - math.lgamma(prior.alpha)
            + gamma_log_normaliser(summary.delta_claims + prior.alpha, summary.lambda_weight + prior.beta)
        )

    def init_latents(self, data: "Dataset") -> LatentState:
        return LatentState(delta=np.ones(data.n, dtype=np.int8), phi=np.ones(data.n))

    def sample_latents(
        self, params: NodeParams, stats: NodeSuffStats, data: "Dataset", latents: LatentState, rng: np.random.Generator
    ) -> None:
        rows = _rows(stats)
        odds, mean = self._odds_and_mean(params, data.exposure[rows])
        # P(δ=1 | N=0) = odds e^{-mean} / (1 + odds e^{-mean})
        p_poisson = expit(np.log(odds) - mean)
        drawn = rng.random(rows.size) < p_poisson
        latents.delta[rows] = np.where(data.claims[rows] > 0, 1, drawn).astype(np.int8)
        latents.phi[rows] = rng.exponential(1.0 / (1.0 + odds))

    def _summary(self, claims: np.ndarray, exposure: np.ndarray, delta: np.ndarray, phi: np.ndarray) -> LatentSummary:
        if self.kind is FamilyKind.ZIP1:
            phi_weight = float(phi.sum())
            lambda_weight = float(np.dot(delta, exposure))
        else:
            phi_weight = float(np.dot(phi, exposure))
            lambda_weight = float(delta.sum())
        return LatentSummary(
            delta=float(delta.sum()),
            phi_weight=phi_weight,
            delta_claims=float(np.dot(delta, claims)),
            lambda_weight=lambda_weight,
        )

    def summarize(self, stats: NodeSuffStats, data: "Dataset", latents: Optional[LatentState]) -> LatentSummary:
        if latents is None or latents.delta is None or latents.phi is None:
            raise ValueError("zero-inflated posterior needs the δ and φ latents")
        rows = _rows(stats)
        return self._summary(
            data.claims[rows].astype(np.float64),
            data.exposure[rows],
            latents.delta[rows].astype(np.float64),
            latents.phi[rows],
        )

    def posterior(self, stats: NodeSuffStats, data: "Dataset", summary: LatentSummary) -> List[GammaShapeRate]:
        prior = self.prior
        return [
            (summary.delta_claims + prior.alpha, summary.lambda_weight + prior.beta),
            (summary.delta + prior.alpha1, summary.phi_weight + prior.beta1),
        ]

    def _params(self, stats: NodeSuffStats, data: "Dataset", values: List[float]) -> NodeParams:
        return NodeParams(lam=values[0], mu=values[1])

    def effective_params(self, stats: NodeSuffStats, summary: LatentSummary) -> float:
        return complexity(summary.delta, self.prior.alpha1) + complexity(summary.delta_claims, self.prior.alpha)

    def expected_count(self, params: NodeParams, exposure: np.ndarray) -> np.ndarray:
        odds, mean = self._odds_and_mean(params, np.asarray(exposure, dtype=np.float64))
        return odds * mean / (1.0 + odds)

    def node_variance(self, params: NodeParams) -> float:
        mu, lam = params.mu, params.lam
        return mu * lam * (1.0 + mu + lam) / (1.0 + mu) ** 2
