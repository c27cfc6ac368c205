"""Shared fixtures: small hand-built portfolios and simulated data"""

from typing import Optional, Sequence

import numpy as np
import pytest

from claimcart.core.params import NodeParams
from claimcart.core.schema import CovariateSchema
from claimcart.core.tree import DecisionRule, Internal, Leaf, NodeSuffStats, Tree
from claimcart.data.dataset import Dataset
from claimcart.data.simulate import ScenarioConfig, simulate_scenario


def numeric_schema(*names: str) -> CovariateSchema:
    return CovariateSchema.from_dict({"variables": [{"name": name} for name in names]})


def categorical_schema(name: str, levels: Sequence[str]) -> CovariateSchema:
    return CovariateSchema.from_dict({"variables": [{"name": name, "kind": "categorical", "levels": list(levels)}]})


def make_dataset(
    X: Sequence,
    claims: Sequence[int],
    exposure: Optional[Sequence[float]] = None,
    schema: Optional[CovariateSchema] = None,
) -> Dataset:
    """A dataset over already-coded covariates; unit exposures by default."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    claims = np.asarray(claims, dtype=np.int64)
    exposure = np.ones(claims.size) if exposure is None else np.asarray(exposure, dtype=np.float64)
    schema = schema or numeric_schema(*[f"x{i + 1}" for i in range(X.shape[1])])
    return Dataset(schema, X, claims, exposure)


def leaf(params: NodeParams, n: int = 1) -> Leaf:
    """Detached leaf carrying parameters, for trees built by hand."""
    return Leaf(NodeSuffStats(None, n, 0, float(n)), params)


def split_tree(schema: CovariateSchema, low: NodeParams, high: NodeParams, threshold: float = 0.0) -> Tree:
    """Two leaves on ``x1 < threshold``: ``low`` on the left, ``high`` on the right."""
    root = Internal(DecisionRule(0, threshold=threshold), leaf(low), leaf(high), NodeSuffStats(None, 2, 0, 2.0))
    return Tree(root, schema)


@pytest.fixture
def normal_data() -> Dataset:
    """200 rows over two standard normal covariates, Poisson(1) claims."""
    rng = np.random.default_rng(7)
    X = rng.standard_normal((200, 2))
    return make_dataset(X, rng.poisson(1.0, 200))


@pytest.fixture
def binary_data() -> Dataset:
    """One binary covariate with 20 rows per value; the only feasible split is x1 < 1."""
    x = np.repeat([0.0, 1.0], 20)
    claims = np.array([0, 1, 1, 0, 2, 1, 0, 1, 0, 1] * 2 + [1, 2, 1, 3, 0, 2, 1, 2, 1, 2] * 2)
    return make_dataset(x, claims)


@pytest.fixture
def overdispersed_data() -> Dataset:
    """Like ``binary_data`` but with claim variances above the means, so κ stays finite in every node."""
    x = np.repeat([0.0, 1.0], 20)
    claims = np.array([0, 0, 0, 3, 0, 1, 0, 0, 4, 0] * 2 + [0, 2, 5, 0, 1, 0, 6, 2, 0, 3] * 2)
    return make_dataset(x, claims)


@pytest.fixture(scope="session")
def scenario1() -> Dataset:
    return simulate_scenario(ScenarioConfig(scenario=1, n=600, seed=11))
