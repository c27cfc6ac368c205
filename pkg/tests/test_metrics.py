"""Tests for the out-of-sample metrics"""

import logging

import numpy as np
import pytest

from conftest import leaf, make_dataset, numeric_schema, split_tree

from claimcart.core.params import GammaPriorPair, NodeParams
from claimcart.core.tree import Tree
from claimcart.evaluation import (
    discrepancy,
    evaluate,
    evaluate_many,
    leaf_table,
    lift,
    lift_common_basis,
    nll,
    report_frame,
    rss_individual,
    rss_portfolio,
)
from claimcart.evaluation.metrics import extreme_groups, lift_from_groups, truncated_frequency
from claimcart.models import make_family

SCHEMA = numeric_schema("x1")
POISSON = make_family("poisson", GammaPriorPair(1.0, 1.0))


def root_tree(lam: float) -> Tree:
    return Tree(leaf(NodeParams(lam)), SCHEMA)


def portfolio(x, claims, exposure=None):
    return make_dataset(x, claims, exposure, schema=SCHEMA)


@pytest.fixture
def risk_split() -> Tree:
    """x1 < 0 predicts frequency 1, x1 >= 0 predicts frequency 2."""
    return split_tree(SCHEMA, NodeParams(1.0), NodeParams(2.0))


class TestErrors:
    def test_rss_individual(self):
        assert rss_individual(root_tree(1.0), POISSON, portfolio([0.0], [2])) == pytest.approx(1.0)
        half = portfolio([0.0, 0.0], [0, 1], [0.5, 0.5])
        assert rss_individual(root_tree(1.0), POISSON, half) == pytest.approx(0.5)

    def test_rss_portfolio_and_discrepancy(self):
        data = portfolio(np.zeros(5), [1, 1, 1, 1, 1])
        tree = root_tree(1.2)
        assert rss_portfolio(tree, POISSON, data) == pytest.approx(0.04)
        assert discrepancy(tree, POISSON, data) == pytest.approx(0.04 / 1.2)

    def test_rss_portfolio_uses_exposure(self):
        data = portfolio(np.zeros(2), [3, 3], [2.0, 3.0])
        assert rss_portfolio(root_tree(1.0), POISSON, data) == pytest.approx(0.04)

    @pytest.mark.parametrize("claims", [0, 1])
    def test_nll(self, claims):
        assert nll(root_tree(1.0), POISSON, portfolio([0.0], [claims])) == pytest.approx(1.0)

    def test_empty_test_set(self):
        empty = make_dataset(np.empty((0, 1)), [], schema=SCHEMA)
        tree = root_tree(1.0)
        assert rss_individual(tree, POISSON, empty) == 0.0
        assert rss_portfolio(tree, POISSON, empty) == 0.0
        assert nll(tree, POISSON, empty) == 0.0

    def test_leaves_without_test_rows_are_left_out(self, risk_split, caplog):
        data = portfolio([-1.0, -2.0], [1, 1])
        table = leaf_table(risk_split, POISSON, data)
        assert list(table["m"]) == [2, 0]
        assert np.isnan(table["empirical"].iloc[1])
        with caplog.at_level(logging.WARNING, logger="claimcart"):
            assert rss_portfolio(risk_split, POISSON, data) == pytest.approx(0.0)
        assert "no test data" in caplog.text

    def test_row_order_does_not_matter(self, risk_split):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(50)
        claims = rng.poisson(1.5, 50)
        exposure = rng.uniform(0.1, 1.0, 50)
        order = rng.permutation(50)
        first = evaluate(risk_split, POISSON, portfolio(x, claims, exposure))
        second = evaluate(risk_split, POISSON, portfolio(x[order], claims[order], exposure[order]))
        assert first.as_row()[1:] == pytest.approx(second.as_row()[1:])


class TestLift:
    def test_equal_group_exposures(self, risk_split):
        data = portfolio([-1.0, 1.0], [1, 2])
        assert lift(risk_split, POISSON, data) == pytest.approx(2.0)

    def test_least_risky_group_is_cut_when_larger(self, risk_split):
        data = portfolio([-1.0, -1.0, -1.0, 1.0, 1.0], [1, 0, 1, 1, 1], [0.9, 0.6, 0.3, 0.5, 0.5])
        # high 2 / 1.0; low cut to the first 1.0 of ascending exposure: 2 / 1.8
        assert lift(risk_split, POISSON, data) == pytest.approx(1.8)

    def test_identical_groups_give_one(self, risk_split):
        data = portfolio([-1.0, -2.0, 1.0, 2.0], [1, 0, 1, 0])
        assert lift(risk_split, POISSON, data) == pytest.approx(1.0)

    def test_undefined_when_the_low_group_has_no_claims(self, risk_split):
        assert lift(risk_split, POISSON, portfolio([-1.0, 1.0], [0, 2])) is None

    def test_undefined_for_a_single_prediction(self):
        assert lift(root_tree(1.0), POISSON, portfolio([0.0, 1.0], [1, 2])) is None

    def test_undefined_when_an_extreme_leaf_is_empty(self, risk_split):
        assert extreme_groups(risk_split, POISSON, portfolio([1.0, 2.0], [1, 2])) is None

    def test_truncation_is_order_invariant_on_ties(self):
        claims = np.array([0.0, 1.0, 2.0])
        exposure = np.array([0.5, 0.5, 0.5])
        forward = truncated_frequency(claims, exposure, 1.0, descending=True)
        backward = truncated_frequency(claims[::-1], exposure[::-1], 1.0, descending=True)
        assert forward == backward == pytest.approx(3.0)

    def test_common_basis_for_one_tree_repeated(self, risk_split):
        data = portfolio([-1.0, -1.0, 1.0, 1.0, 1.0], [1, 0, 1, 1, 0], [0.7, 0.4, 0.6, 0.3, 0.5])
        values = lift_common_basis([(risk_split, POISSON), (risk_split, POISSON)], data)
        groups = extreme_groups(risk_split, POISSON, data)
        assert values[0] == values[1]
        assert values[0] == pytest.approx(lift_from_groups(groups, min(groups.v_min, groups.v_max)))


class TestReports:
    def test_evaluate_many_shares_the_lift_basis(self, risk_split):
        data = portfolio([-1.0, 1.0], [1, 2])
        reports = evaluate_many({"a": (risk_split, POISSON), "b": (risk_split, POISSON)}, data)
        frame = report_frame(reports)
        assert list(frame.columns) == ["model", "rss_N", "rss_Nv", "nll", "ds_Nv", "lift"]
        assert list(frame["model"]) == ["a", "b"]
        assert frame["lift"].tolist() == pytest.approx([2.0, 2.0])

    def test_default_name_is_the_family(self):
        assert evaluate(root_tree(1.0), POISSON, portfolio([0.0], [1])).model == "poisson"

    def test_zero_inflated_leaf_table(self):
        model = make_family("zip1", GammaPriorPair(1.0, 1.0))
        tree = Tree(leaf(NodeParams(2.0, mu=1.0)), SCHEMA)
        table = leaf_table(tree, model, portfolio([0.0, 0.0], [0, 2]))
        assert table["y_hat"].iloc[0] == pytest.approx(1.0)
        assert table["variance"].iloc[0] == pytest.approx(1.0 * 2.0 * 4.0 / 4.0)
        assert table["empirical"].iloc[0] == pytest.approx(1.0)
