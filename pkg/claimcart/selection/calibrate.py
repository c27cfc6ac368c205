"""
Choosing prior hyper-parameters per target leaf count

At gamma = 0.99 the prior leaf count falls as rho grows, so for each target
j a bisection on rho with short pilot chains finds a value whose pilot run
settles near j leaves.
"""

import logging
from dataclasses import replace
from typing import List, Optional, Tuple

import numpy as np

from claimcart.data.dataset import Dataset
from claimcart.errors import ConfigError
from claimcart.search.chain import ChainConfig, TreeSampler
from claimcart.search.prior import SplitCandidateSet
from claimcart.selection.select import GridPoint, SelectionGrid

logger = logging.getLogger(__name__)


def pilot_leaf_count(config: ChainConfig, data: Dataset, candidates: SplitCandidateSet) -> float:
    """Median post-burn-in leaf count of a pilot run."""
    result = TreeSampler(config, data, candidates).run()
    counts = [record.n_leaves for record in result.trace if record.iteration > config.burn_in]
    return float(np.median(counts))


def calibrate_grid(
    m_s: int,
    m_e: int,
    data: Dataset,
    config: ChainConfig,
    gamma: float = 0.99,
    pilot_iterations: int = 1000,
    rho_bounds: Tuple[float, float] = (0.0, 60.0),
    max_steps: int = 12,
    candidates: Optional[SplitCandidateSet] = None,
) -> SelectionGrid:
    """
    Build a selection grid for the leaf counts m_s..m_e.

    Args:
        m_s: Smallest target leaf count
        m_e: Largest target leaf count
        data: Training data
        config: Chain settings the pilots start from (one restart each)
        gamma: Root split probability shared by all grid points
        pilot_iterations: Iterations per pilot chain, a quarter of them burn-in
        rho_bounds: Bisection bracket for rho
        max_steps: Pilot runs per target before the closest rho is kept

    Returns:
        Grid points (j, gamma, rho_j) for every j in [m_s, m_e]

    Raises:
        ConfigError: If the leaf-count range is empty or not positive
    """
    if m_s < 1 or m_e < m_s:
        raise ConfigError(f"need 1 <= m_s <= m_e, got m_s={m_s}, m_e={m_e}")
    candidates = candidates or SplitCandidateSet.from_data(data, config.prior)
    points: List[GridPoint] = []
    for j in range(m_s, m_e + 1):
        low, high = rho_bounds
        best_rho, best_gap = high, np.inf
        for step in range(max_steps):
            rho = 0.5 * (low + high)
            pilot = replace(
                config,
                prior=replace(config.prior, gamma=gamma, rho=rho),
                iterations=pilot_iterations,
                burn_in=pilot_iterations // 4,
                restarts=1,
                workers=1,
                progress=False,
                seed=int(np.random.SeedSequence([config.seed, j, step]).generate_state(1)[0]),
            )
            leaves = pilot_leaf_count(pilot, data, candidates)
            logger.debug("j=%d step %d: rho=%.4g gives %.1f leaves", j, step, rho, leaves)
            if abs(leaves - j) < best_gap:
                best_rho, best_gap = rho, abs(leaves - j)
            if leaves == j:
                break
            if leaves > j:
                low = rho
            else:
                high = rho
        logger.info("Calibrated j=%d: rho=%.4g (pilot off by %.1f leaves)", j, best_rho, best_gap)
        points.append(GridPoint(j, gamma, best_rho))
    return SelectionGrid(points)
