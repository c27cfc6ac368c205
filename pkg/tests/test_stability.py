"""Tests for the prediction stability harness"""

import numpy as np
import pytest

from conftest import make_dataset

from claimcart.data.dataset import stratified_split
from claimcart.evaluation import stability_assess, stability_predictions


@pytest.fixture
def portfolio():
    rng = np.random.default_rng(12)
    return make_dataset(rng.standard_normal(200), rng.poisson(0.4, 200))


def constant(train, k):
    return lambda test: np.full(test.n, 0.3)


def repeat_index(train, k):
    return lambda test: np.full(test.n, float(k))


class TestStabilityAssess:
    def test_constant_predictions_are_perfectly_stable(self, portfolio):
        assert stability_assess(constant, portfolio) == 0.0

    def test_repeat_index_predictions(self, portfolio):
        # sample variance of 1..20
        assert stability_assess(repeat_index, portfolio, repeats=20) == pytest.approx(35.0)

    def test_training_mean_varies_across_refits(self, portfolio):
        def mean_rate(train, k):
            rate = train.claim_rate()
            return lambda test: np.full(test.n, rate)

        value = stability_assess(mean_rate, portfolio, repeats=5)
        assert value > 0.0

    @pytest.mark.parametrize("repeats, subsample", [(1, 0.9), (5, 0.0), (5, 1.5)])
    def test_invalid_settings(self, portfolio, repeats, subsample):
        with pytest.raises(ValueError):
            stability_assess(constant, portfolio, repeats=repeats, subsample=subsample)


class TestStabilityPredictions:
    def test_subset_sizes_and_shape(self, portfolio):
        sizes = []

        def recording(train, k):
            sizes.append((k, train.n))
            return lambda test: np.zeros(test.n)

        predictions = stability_predictions(recording, portfolio, repeats=4, subsample=0.5, train_fraction=0.8)
        train, test = stratified_split(portfolio, 0.8, seed=0)
        assert sizes == [(k, int(round(0.5 * train.n))) for k in (1, 2, 3, 4)]
        assert predictions.shape == (4, test.n)

    def test_seeded(self, portfolio):
        def first_row(train, k):
            value = float(train.X[0, 0])
            return lambda test: np.full(test.n, value)

        first = stability_predictions(first_row, portfolio, repeats=3, seed=5)
        second = stability_predictions(first_row, portfolio, repeats=3, seed=5)
        np.testing.assert_array_equal(first, second)
