"""
Chain trace records and a buffered, observable trace writer
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple, Union

import pandas as pd

TRACE_COLUMNS = ["restart", "iteration", "move", "accepted", "n_leaves", "log_marginal", "log_data_lik"]


@dataclass(frozen=True)
class TraceRecord:
    """One chain iteration: the move tried, its outcome and the state afterwards"""

    restart: int
    iteration: int
    move: str
    accepted: bool
    n_leaves: int
    log_marginal: float
    log_data_lik: float
    usage: Tuple[int, ...]

    def as_row(self) -> list:
        return [
            self.restart,
            self.iteration,
            self.move,
            int(self.accepted),
            self.n_leaves,
            self.log_marginal,
            self.log_data_lik,
            *self.usage,
        ]


class TraceBuffer:
    """
    Collects trace records and hands them to listeners in batches.

    Example:
        >>> buffer = TraceBuffer(batch_size=2)
        >>> buffer.subscribe(lambda batch: print(len(batch)))
        >>> buffer.append(record)
        >>> buffer.append(record)  # Triggers listener notification
        2
    """

    def __init__(self, batch_size: int = 1000):
        """
        Args:
            batch_size: Number of records held back before listeners are notified
        """
        self.batch_size = batch_size
        self.records: List[TraceRecord] = []
        self._pending: List[TraceRecord] = []
        self._listeners: List[Callable[[List[TraceRecord]], None]] = []

    def subscribe(self, listener: Callable[[List[TraceRecord]], None]) -> None:
        if listener not in self._listeners:
            self._listeners.append(listener)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)
        self._pending.append(record)
        if len(self._pending) >= self.batch_size:
            self.flush()

    def extend(self, records: Sequence[TraceRecord]) -> None:
        for record in records:
            self.append(record)

    def flush(self) -> None:
        if not self._pending:
            return
        batch, self._pending = self._pending, []
        # Notify all listeners
        for listener in self._listeners:
            listener(batch)


def trace_frame(records: Sequence[TraceRecord], variable_names: Sequence[str]) -> pd.DataFrame:
    columns = TRACE_COLUMNS + list(variable_names)
    return pd.DataFrame([record.as_row() for record in records], columns=columns)


class CsvTraceWriter:
    """Listener that appends trace batches to a CSV file, header first"""

    def __init__(self, path: Union[str, Path], variable_names: Sequence[str]):
        self.path = Path(path)
        self.variable_names = list(variable_names)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        trace_frame([], self.variable_names).to_csv(self.path, index=False)

    def __call__(self, batch: List[TraceRecord]) -> None:
        trace_frame(batch, self.variable_names).to_csv(
            self.path, mode="a", header=False, index=False, float_format="%.10g"
        )


def acceptance_table(proposed: Dict[str, int], accepted: Dict[str, int]) -> pd.DataFrame:
    moves = sorted(proposed)
    return pd.DataFrame(
        {
            "move": moves,
            "proposed": [proposed[m] for m in moves],
            "accepted": [accepted.get(m, 0) for m in moves],
            "rate": [accepted.get(m, 0) / proposed[m] if proposed[m] else 0.0 for m in moves],
        }
    )
