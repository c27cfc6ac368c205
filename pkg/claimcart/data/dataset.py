"""
Claims datasets for claimcart

A Dataset holds the coded covariate matrix, the claim counts and the
exposures of a portfolio, validated against a CovariateSchema.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from claimcart.core.schema import CovariateSchema
from claimcart.errors import IngestionError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    A validated claims portfolio.

    Categorical covariates are stored as level codes (their position in the
    schema's level tuple) so the whole design fits one float matrix.

    Example:
        >>> frame = pd.DataFrame({"x1": [0.5, -1.0], "N": [0, 2], "v": [1.0, 0.5]})
        >>> data = Dataset.from_frame(frame, CovariateSchema.from_dict(
        ...     {"variables": [{"name": "x1"}]}))
        >>> data.n
        2
    """

    schema: CovariateSchema
    X: np.ndarray
    claims: np.ndarray
    exposure: np.ndarray

    @property
    def n(self) -> int:
        return int(self.claims.shape[0])

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.schema, self.X[rows], self.claims[rows], self.exposure[rows])

    def claim_rate(self) -> float:
        """Portfolio claims frequency ΣN/Σv."""
        return float(self.claims.sum() / self.exposure.sum())

    def to_frame(self) -> pd.DataFrame:
        columns = {}
        for j, variable in enumerate(self.schema.variables):
            if variable.is_categorical:
                columns[variable.name] = [variable.levels[int(code)] for code in self.X[:, j]]
            else:
                columns[variable.name] = self.X[:, j]
        columns[self.schema.response_column] = self.claims
        columns[self.schema.exposure_column] = self.exposure
        return pd.DataFrame(columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, schema: CovariateSchema) -> "Dataset":
        """
        Validate a raw frame and encode it.

        Categorical level sets missing from the schema are collected from the
        frame; declared level sets are enforced.

        Raises:
            IngestionError: On a missing column, a missing value, a non-numeric
                or negative claim count, or an exposure outside (0, 1]
        """
        required = schema.names + [schema.response_column, schema.exposure_column]
        for column in required:
            if column not in frame.columns:
                raise IngestionError("missing column", column=column)

        for column in required:
            missing = frame[column].isna().to_numpy()
            if missing.any():
                raise IngestionError("missing value", row=int(np.argmax(missing)) + 1, column=column)

        schema = schema.with_levels(
            {v.name: frame[v.name].astype(str).unique() for v in schema.variables if v.is_categorical}
        )

        claims = _numeric_column(frame, schema.response_column)
        bad = (claims < 0) | (claims != np.floor(claims))
        if bad.any():
            raise IngestionError(
                f"claim count must be a non-negative integer, got {claims[np.argmax(bad)]!r}",
                row=int(np.argmax(bad)) + 1,
                column=schema.response_column,
            )

        exposure = _numeric_column(frame, schema.exposure_column)
        bad = ~((exposure > 0.0) & (exposure <= 1.0))
        if bad.any():
            raise IngestionError(
                f"exposure must lie in (0, 1], got {exposure[np.argmax(bad)]!r}",
                row=int(np.argmax(bad)) + 1,
                column=schema.exposure_column,
            )

        X = np.empty((len(frame), schema.p), dtype=np.float64)
        for j, variable in enumerate(schema.variables):
            if variable.is_categorical:
                lookup = {level: code for code, level in enumerate(variable.levels)}
                labels = frame[variable.name].astype(str).to_numpy()
                codes = np.array([lookup.get(label, -1) for label in labels], dtype=np.int64)
                if (codes < 0).any():
                    row = int(np.argmax(codes < 0))
                    raise IngestionError(f"undeclared level {labels[row]!r}", row=row + 1, column=variable.name)
                X[:, j] = codes
            else:
                X[:, j] = _numeric_column(frame, variable.name)

        return cls(schema, X, claims.astype(np.int64), exposure)


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.isnan(values)
    if bad.any():
        row = int(np.argmax(bad))
        raise IngestionError(f"non-numeric value {frame[column].iloc[row]!r}", row=row + 1, column=column)
    return values


def load_csv(path: PathLike, schema: CovariateSchema) -> Dataset:
    """
    Read a CSV file with a header row into a validated Dataset.

    Args:
        path: CSV file
        schema: Declared covariates, response and exposure columns

    Returns:
        The typed dataset
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"file not found: {path}")
    categorical = {v.name: str for v in schema.variables if v.is_categorical}
    try:
        frame = pd.read_csv(path, dtype=categorical)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot parse {path}: {exc}") from exc
    data = Dataset.from_frame(frame, schema)
    logger.info("Loaded %d rows from %s", data.n, path)
    return data


def save_csv(data: Dataset, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data.to_frame().to_csv(path, index=False, float_format="%.17g")


def stratified_split(data: Dataset, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Split into train and test sets keeping the zero/positive claim balance.

    Zero-claim and positive-claim rows are shuffled and cut at the fraction
    independently; both outputs keep the original row order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_rows = []
    for stratum in (np.flatnonzero(data.claims == 0), np.flatnonzero(data.claims > 0)):
        if stratum.size == 0:
            continue
        shuffled = rng.permutation(stratum)
        train_rows.append(shuffled[: int(round(train_fraction * stratum.size))])
    train = np.sort(np.concatenate(train_rows)) if train_rows else np.empty(0, dtype=np.int64)
    test = np.setdiff1d(np.arange(data.n), train)
    return data.subset(train), data.subset(test)
