"""
Simulated claims portfolios

Scenario 1: Poisson claims driven by the sign of x1 * x2 with six noise
covariates. Scenario 2: zero-inflated claims with a fixed point-mass
probability and unit exposure. Scenario 3: zero-inflated claims whose
point-mass probability depends on exposure through tau.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from claimcart.core.schema import CovariateSchema
from claimcart.data.dataset import Dataset

logger = logging.getLogger(__name__)

SIGNED_LEVELS = np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class ScenarioConfig:
    """
    Settings of a simulated portfolio.

    Args:
        scenario: 1, 2 or 3
        n: Number of policies
        seed: Seed of the generator
        p0: Point-mass probability of scenario 2, in (0, 1)
        tau: Exposure power of scenario 3's point-mass probability, >= 0
    """

    scenario: int = 1
    n: int = 5000
    seed: int = 0
    p0: Optional[float] = None
    tau: Optional[float] = None

    def __post_init__(self) -> None:
        if self.scenario not in (1, 2, 3):
            raise ValueError(f"scenario must be 1, 2 or 3, got {self.scenario}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.scenario == 2 and (self.p0 is None or not 0.0 < self.p0 < 1.0):
            raise ValueError(f"scenario 2 needs p0 in (0, 1), got {self.p0}")
        if self.scenario == 3 and (self.tau is None or self.tau < 0.0):
            raise ValueError(f"scenario 3 needs tau >= 0, got {self.tau}")


def sample_zip(p: ArrayLike, lam: ArrayLike, exposure: ArrayLike, rng: np.random.Generator) -> np.ndarray:
    """
    Zero-inflated Poisson draws: 0 with probability ``p``, else Poisson(lam * exposure).

    Arguments broadcast against each other.
    """
    p, lam, exposure = np.broadcast_arrays(np.asarray(p, float), np.asarray(lam, float), np.asarray(exposure, float))
    zero = rng.random(p.shape) < p
    counts = rng.poisson(lam * exposure)
    return np.where(zero, 0, counts).astype(np.int64)


def uniform_exposure(n: int, rng: np.random.Generator) -> np.ndarray:
    """U(0, 1) exposures with exact zeros redrawn."""
    v = rng.uniform(0.0, 1.0, n)
    while (v == 0.0).any():
        zeros = v == 0.0
        v[zeros] = rng.uniform(0.0, 1.0, int(zeros.sum()))
    return v


def sign_intensity(x1: np.ndarray, x2: np.ndarray, same_sign: float, otherwise: float) -> np.ndarray:
    return np.where(x1 * x2 > 0.0, same_sign, otherwise)


def simulate_scenario(config: ScenarioConfig) -> Dataset:
    """
    Generate the portfolio of a scenario.

    Example:
        >>> data = simulate_scenario(ScenarioConfig(scenario=2, n=100, p0=0.5))
        >>> float(data.exposure.min())
        1.0
    """
    rng = np.random.default_rng(config.seed)
    n = config.n
    schema = CovariateSchema.scenario(config.scenario)
    if config.scenario == 1:
        v = uniform_exposure(n, rng)
        codes = {k: rng.integers(len(SIGNED_LEVELS), size=n) for k in (1, 7, 8)}
        x2 = rng.standard_normal(n)
        x3, x4 = rng.uniform(-1.0, 1.0, n), rng.uniform(-1.0, 1.0, n)
        x5, x6 = rng.standard_normal(n), rng.standard_normal(n)
        X = np.column_stack([codes[1], x2, x3, x4, x5, x6, codes[7], codes[8]]).astype(np.float64)
        lam = sign_intensity(SIGNED_LEVELS[codes[1]], x2, 7.0, 1.0)
        claims = rng.poisson(lam * v)
    else:
        v = np.ones(n) if config.scenario == 2 else uniform_exposure(n, rng)
        x1, x2 = rng.standard_normal(n), rng.standard_normal(n)
        X = np.column_stack([x1, x2])
        lam = sign_intensity(x1, x2, 1.0, 7.0)
        if config.scenario == 2:
            p = np.full(n, config.p0)
        else:
            p = 0.5 / (v**config.tau + 0.5)
        claims = sample_zip(p, lam, v, rng)
    logger.info(
        "Simulated scenario %d: %d policies, %d claims, exposure %.1f",
        config.scenario,
        n,
        int(claims.sum()),
        float(v.sum()),
    )
    return Dataset(schema, X, np.asarray(claims, dtype=np.int64), v)
