"""
Trace Recording
Fixed-column time series of a run, buffered in memory and written as CSV
"""

from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from app.core.exceptions import TraceError

PER_CONVERTER = ("v_conv", "i_line", "droop", "r_v", "r_i", "i_pu", "i_ref_pu")


def trace_columns(n: int) -> List[str]:
    """Column order: t, per-converter blocks, v_bus, v_bar_pu per node, i_load"""
    columns = ["t"]
    for k in range(1, n + 1):
        columns += [f"{name}_{k}" for name in PER_CONVERTER]
    columns.append("v_bus")
    columns += [f"v_bar_pu_{k}" for k in range(1, n + 1)]
    columns.append("i_load")
    return columns


class TraceRecorder:
    """Preallocated row buffer; rows beyond the last record are dropped on export"""

    def __init__(self, n: int, capacity: int):
        self.n = n
        self.columns = trace_columns(n)
        self._rows = np.zeros((capacity, len(self.columns)))
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def record(self, t: float, state, nodes: Sequence, i_rated: np.ndarray) -> None:
        """
        Append one sample

        Args:
            t: Simulation time
            state: PlantState
            nodes: DscNode per converter, supplying droop terms and references
            i_rated: Per-unit current bases
        """
        if self._count >= self._rows.shape[0]:
            raise TraceError("trace buffer is full")
        n = self.n
        row = self._rows[self._count]
        row[0] = t
        i_pu = state.i_line / i_rated
        for k, node in enumerate(nodes):
            base = 1 + 7 * k
            row[base:base + 7] = (
                state.v_conv[k],
                state.i_line[k],
                node.droop,
                node.r_v,
                node.r_i,
                i_pu[k],
                node.i_ref_pu,
            )
        row[1 + 7 * n] = state.v_bus
        row[2 + 7 * n:2 + 8 * n] = [node.v_bar_pu for node in nodes]
        row[-1] = state.i_load
        self._count += 1

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self._rows[:self._count].copy(), columns=self.columns)


def write_trace(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def load_trace(path: Union[str, Path]) -> pd.DataFrame:
    """
    Read a trace CSV

    Raises:
        TraceError: Missing file, unreadable CSV, empty trace or no time column
    """
    path = Path(path)
    if not path.is_file():
        raise TraceError(f"trace file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise TraceError(f"trace file is empty: {path}")
    except pd.errors.ParserError as e:
        raise TraceError(f"cannot parse trace {path}: {e}")
    if "t" not in frame.columns:
        raise TraceError(f"trace {path} has no 't' column")
    if frame.empty:
        raise TraceError(f"trace {path} has no samples")
    return frame
