"""Response families: Poisson, negative binomial and zero-inflated Poisson"""

from typing import TYPE_CHECKING, Union

from claimcart.core.params import GammaPriorPair, LatentState, LatentSummary, NodeParams
from claimcart.models.base import FamilyKind, NodeDic, NodeModel
from claimcart.models.negbin import NegativeBinomialModel, estimate_kappa
from claimcart.models.poisson import PoissonModel, poisson_log_marginal
from claimcart.models.zip import ZeroInflatedPoissonModel

if TYPE_CHECKING:
    from claimcart.data.dataset import Dataset


def make_family(kind: Union[FamilyKind, str], prior: GammaPriorPair, kappa_max: float = 1e6) -> NodeModel:
    """
    Build the node model of a family.

    Example:
        >>> make_family("zip2", GammaPriorPair(1.0, 1.0)).kind
        <FamilyKind.ZIP2: 'zip2'>
    """
    kind = FamilyKind(kind)
    if kind is FamilyKind.POISSON:
        return PoissonModel(prior, kappa_max)
    if kind in (FamilyKind.NB1, FamilyKind.NB2):
        return NegativeBinomialModel(prior, kappa_max, mode=kind)
    return ZeroInflatedPoissonModel(prior, kappa_max, mode=kind)


def default_prior(data: "Dataset", beta: float = 0.8) -> GammaPriorPair:
    """
    Gamma prior whose mean alpha/beta is the portfolio claims frequency.

    The zero-mass odds of the zero-inflated families get Gamma(1, 1).
    """
    return GammaPriorPair.from_rate(data.claim_rate(), beta=beta)


__all__ = [
    "FamilyKind",
    "NodeModel",
    "NodeDic",
    "NodeParams",
    "GammaPriorPair",
    "LatentState",
    "LatentSummary",
    "PoissonModel",
    "NegativeBinomialModel",
    "ZeroInflatedPoissonModel",
    "make_family",
    "default_prior",
    "estimate_kappa",
    "poisson_log_marginal",
]
