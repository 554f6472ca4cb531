"""
Performance Indices
Integral-squared-error over evaluation windows and settling times, computed on traces
"""

from typing import List, Optional

import numpy as np
import pandas as pd

from app.config import settings
from app.core.exceptions import TraceError
from app.models.schemas import IseWindow, cycle_windows  # noqa: F401

_EDGE_TOL = 1e-9


def converter_count(trace: pd.DataFrame) -> int:
    n = sum(1 for col in trace.columns if col.startswith("v_conv_"))
    if n == 0:
        raise TraceError("trace has no converter voltage columns")
    return n


def _require(trace: pd.DataFrame, columns: List[str]) -> None:
    missing = [c for c in columns if c not in trace.columns]
    if missing:
        raise TraceError(f"trace is missing columns: {', '.join(missing)}")
    if trace.empty:
        raise TraceError("trace is empty")


def _integrate(t: np.ndarray, y: np.ndarray, t_start: float, t_end: float) -> float:
    """Trapezoidal integral over [t_start, t_end] with interpolated endpoints"""
    if t_start < t[0] - _EDGE_TOL or t_end > t[-1] + _EDGE_TOL:
        raise TraceError(
            f"window [{t_start}, {t_end}] is outside the trace [{t[0]}, {t[-1]}]"
        )
    inside = (t > t_start) & (t < t_end)
    grid = np.concatenate(([t_start], t[inside], [t_end]))
    values = np.concatenate(([np.interp(t_start, t, y)], y[inside], [np.interp(t_end, t, y)]))
    return float(np.trapezoid(values, grid))


def rating_shares(trace: pd.DataFrame) -> np.ndarray:
    """Per-converter rating shares recovered from the amp and per-unit current columns"""
    n = converter_count(trace)
    ratings = np.empty(n)
    for k in range(1, n + 1):
        _require(trace, [f"i_line_{k}", f"i_pu_{k}"])
        amps = trace[f"i_line_{k}"].to_numpy()
        pu = trace[f"i_pu_{k}"].to_numpy()
        usable = np.abs(pu) > 1e-6
        if not usable.any():
            raise TraceError(f"cannot infer the rating of converter {k}")
        ratings[k - 1] = float(np.median(amps[usable] / pu[usable]))
    return ratings / ratings.sum()


def ise_v(trace: pd.DataFrame, window: IseWindow) -> float:
    """ISE of the mean converter voltage against window.v_ref"""
    n = converter_count(trace)
    cols = [f"v_conv_{k}" for k in range(1, n + 1)]
    _require(trace, ["t"] + cols)
    v_mean = trace[cols].to_numpy().mean(axis=1)
    err_sq = (window.v_ref - v_mean) ** 2
    return _integrate(trace["t"].to_numpy(), err_sq, window.t_start, window.t_end)


def ise_i(trace: pd.DataFrame, window: IseWindow, shares: Optional[np.ndarray] = None) -> float:
    """
    ISE of the summed squared current-sharing errors

    References are window.i_refs when given, else the load current split by
    rating share (inferred from the trace when shares is None).
    """
    n = converter_count(trace)
    cols = [f"i_line_{k}" for k in range(1, n + 1)]
    _require(trace, ["t", "i_load"] + cols)
    currents = trace[cols].to_numpy()

    if window.i_refs is not None:
        if len(window.i_refs) != n:
            raise TraceError(f"{len(window.i_refs)} current references for {n} converters")
        refs = np.broadcast_to(np.asarray(window.i_refs, dtype=float), currents.shape)
    else:
        shares = rating_shares(trace) if shares is None else np.asarray(shares, dtype=float)
        refs = np.outer(trace["i_load"].to_numpy(), shares)

    err_sq = ((refs - currents) ** 2).sum(axis=1)
    return _integrate(trace["t"].to_numpy(), err_sq, window.t_start, window.t_end)


def settling_time(
        t: np.ndarray,
        y: np.ndarray,
        t_event: float,
        t_end: float,
        band: float = settings.SETTLING_BAND,
) -> Optional[float]:
    """
    Time after t_event from which y stays within band*|final - initial| of its final value

    The final value is the mean over the last SETTLE_WINDOW before t_end.
    Returns None when the signal is still outside the band at t_end.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    seg = (t >= t_event - _EDGE_TOL) & (t <= t_end + _EDGE_TOL)
    if seg.sum() < 2:
        raise TraceError(f"no samples between {t_event} and {t_end}")
    ts, ys = t[seg], y[seg]

    tail = ts >= t_end - settings.SETTLE_WINDOW
    final = float(ys[tail].mean())
    tol = band * abs(final - float(np.interp(t_event, t, y)))
    if tol == 0:
        return 0.0

    outside = np.flatnonzero(np.abs(ys - final) > tol)
    if outside.size == 0:
        return 0.0
    last = int(outside[-1])
    if last == ys.size - 1:
        return None
    return float(ts[last + 1] - t_event)
