"""
Prediction stability under training-set perturbation
"""

import logging
from typing import Callable

import numpy as np

from claimcart.data.dataset import Dataset, stratified_split

logger = logging.getLogger(__name__)

Predictor = Callable[[Dataset], np.ndarray]
FitProcedure = Callable[[Dataset, int], Predictor]


def stability_predictions(
    fit_procedure: FitProcedure,
    data: Dataset,
    repeats: int = 20,
    subsample: float = 0.9,
    seed: int = 0,
    train_fraction: float = 0.8,
) -> np.ndarray:
    """
    Predictions for a fixed test set from models fit on random training subsets.

    The data is split once into training and test parts (stratified by zero
    and positive claims). Each repeat k = 1..repeats draws ``subsample`` of the
    training rows without replacement and calls ``fit_procedure(subset, k)``,
    which returns a predictor for the test set.

    Returns:
        Array of shape (repeats, test rows)
    """
    if repeats < 2:
        raise ValueError(f"repeats must be at least 2, got {repeats}")
    if not 0.0 < subsample <= 1.0:
        raise ValueError(f"subsample must lie in (0, 1], got {subsample}")
    train, test = stratified_split(data, train_fraction, seed)
    size = int(round(subsample * train.n))
    predictions = np.empty((repeats, test.n))
    for k in range(1, repeats + 1):
        rng = np.random.default_rng([seed, k])
        rows = np.sort(rng.choice(train.n, size=size, replace=False))
        predictor = fit_procedure(train.subset(rows), k)
        predictions[k - 1] = predictor(test)
        logger.debug("Stability repeat %d/%d done", k, repeats)
    return predictions


def stability_assess(
    fit_procedure: FitProcedure,
    data: Dataset,
    repeats: int = 20,
    subsample: float = 0.9,
    seed: int = 0,
    train_fraction: float = 0.8,
) -> float:
    """
    Mean over test rows of the sample variance of their predictions across refits.

    Smaller means more stable.

    Example:
        >>> stability_assess(lambda train, k: (lambda test: np.full(test.n, float(k))), data)
        35.0
    """
    predictions = stability_predictions(fit_procedure, data, repeats, subsample, seed, train_fraction)
    value = float(np.var(predictions, axis=0, ddof=1).mean())
    logger.info("Mean prediction variance over %d refits: %.6g", repeats, value)
    return value
