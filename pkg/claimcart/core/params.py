"""
Parameter containers carried by tree leaves and chain states
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np


@dataclass(frozen=True)
class NodeParams:
    """
    Leaf parameters of a response family.

    ``lam`` is the claims frequency, ``mu`` the zero-mass odds parameter of the
    zero-inflated families and ``kappa`` the point-estimated dispersion of the
    negative-binomial families. Fields a family does not use stay ``None``.
    """

    lam: float
    mu: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("lam", "mu", "kappa"):
            value = getattr(self, name)
            if value is not None and not value > 0.0:
                raise ValueError(f"{name} must be positive, got {value}")

    def to_dict(self) -> Dict[str, float]:
        return {key: value for key, value in asdict(self).items() if value is not None}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NodeParams":
        return cls(**{key: float(value) for key, value in data.items()})


@dataclass(frozen=True)
class GammaPriorPair:
    """
    Gamma prior hyper-parameters (shape, rate).

    ``alpha``/``beta`` govern the frequency λ; ``alpha1``/``beta1`` govern the
    zero-mass odds μ of the zero-inflated families.
    """

    alpha: float
    beta: float
    alpha1: float = 1.0
    beta1: float = 1.0

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not value > 0.0:
                raise ValueError(f"{name} must be positive, got {value}")

    @classmethod
    def from_rate(cls, rate: float, beta: float = 0.8, alpha1: float = 1.0, beta1: float = 1.0) -> "GammaPriorPair":
        """Keep the prior mean alpha/beta at a portfolio claims frequency."""
        return cls(alpha=max(rate, 1e-3) * beta, beta=beta, alpha1=alpha1, beta1=beta1)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class LatentState:
    """
    Augmentation variables, one entry per training row.

    ``xi`` is used by the negative-binomial families, ``delta`` and ``phi``
    by the zero-inflated families.
    """

    xi: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None

    def copy(self) -> "LatentState":
        return LatentState(
            xi=None if self.xi is None else self.xi.copy(),
            delta=None if self.delta is None else self.delta.copy(),
            phi=None if self.phi is None else self.phi.copy(),
        )


@dataclass(frozen=True)
class LatentSummary:
    """
    Per-leaf aggregates of the latent state.

    These are the only functions of the latents that the posterior means
    and the deviance information criterion depend on.

    Negative binomial: ``xi_exposure`` = Σξv.
    Zero-inflated: ``delta`` = Σδ, ``phi_weight`` = Σφ (or Σφv when the
    exposure sits in the zero part), ``delta_claims`` = ΣδN,
    ``lambda_weight`` = Σδv (or Σδ).
    """

    xi_exposure: float = 0.0
    delta: float = 0.0
    phi_weight: float = 0.0
    delta_claims: float = 0.0
    lambda_weight: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LatentSummary":
        return cls(**{key: float(value) for key, value in data.items()})
