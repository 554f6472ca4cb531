"""
Plot Script Emitter
Writes a standalone matplotlib script for a trace, optionally comparing two traces by ISE
"""

from pathlib import Path
from typing import List, Optional, Union

import pandas as pd

from app.config import settings
from app.core.exceptions import TraceError
from app.services.metrics import converter_count
from app.services.trace import load_trace
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

_SCRIPT = '''"""Plots for {name}"""

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

TRACE = {trace!r}
COMPARE = {compare!r}
TAU = {tau!r}
V_REF = {v_ref!r}
DROOPS = {droops!r}
CURRENTS = {currents!r}
VOLTAGES = {voltages!r}
PER_UNIT = {per_unit!r}


def ise_per_window(frame):
    t = frame["t"].to_numpy()
    v_err = (V_REF - frame[VOLTAGES].to_numpy().mean(axis=1)) ** 2
    amps = frame[CURRENTS].to_numpy()
    pu = frame[PER_UNIT].to_numpy()
    ok = np.abs(pu) > 1e-6
    ratings = np.array([np.median(amps[ok[:, k], k] / pu[ok[:, k], k]) for k in range(amps.shape[1])])
    refs = np.outer(frame["i_load"].to_numpy(), ratings / ratings.sum())
    i_err = ((refs - amps) ** 2).sum(axis=1)
    starts = np.arange(t[0], t[-1] - TAU + 1e-9, TAU)
    ise_v, ise_i = [], []
    for t0 in starts:
        sel = (t >= t0) & (t <= t0 + TAU)
        ise_v.append(np.trapezoid(v_err[sel], t[sel]))
        ise_i.append(np.trapezoid(i_err[sel], t[sel]))
    return np.array(ise_v), np.array(ise_i)


def main():
    frame = pd.read_csv(TRACE)
    panels = 5 if COMPARE else 3
    fig, axes = plt.subplots(panels, 1, figsize=(9, 2.6 * panels), sharex=False)

    for col in DROOPS:
        axes[0].plot(frame["t"], frame[col], label=col)
    axes[0].set_ylabel("droop (ohm)")
    for col in CURRENTS:
        axes[1].plot(frame["t"], frame[col], label=col)
    axes[1].set_ylabel("current (A)")
    for col in VOLTAGES + ["v_bus"]:
        axes[2].plot(frame["t"], frame[col], label=col)
    axes[2].set_ylabel("voltage (V)")
    axes[2].set_xlabel("t (s)")

    if COMPARE:
        other = pd.read_csv(COMPARE)
        width = 0.4
        for ax, pick, label in ((axes[3], 0, "ISE_V"), (axes[4], 1, "ISE_I")):
            mine = ise_per_window(frame)[pick]
            theirs = ise_per_window(other)[pick]
            idx = np.arange(max(len(mine), len(theirs)))
            ax.bar(idx[:len(mine)] - width / 2, mine, width, label=TRACE)
            ax.bar(idx[:len(theirs)] + width / 2, theirs, width, label=COMPARE)
            ax.set_ylabel(label)
            ax.set_xlabel("window")

    for ax in axes:
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig({png!r}, dpi=150)
    plt.show()


if __name__ == "__main__":
    main()
'''


def _columns(trace: pd.DataFrame, prefix: str, n: int) -> List[str]:
    cols = [f"{prefix}_{k}" for k in range(1, n + 1)]
    missing = [c for c in cols if c not in trace.columns]
    if missing:
        raise TraceError(f"trace is missing columns: {', '.join(missing)}")
    return cols


def _check(path: Path, compare: bool) -> int:
    trace = load_trace(path)
    n = converter_count(trace)
    for prefix in ("droop", "i_line", "v_conv"):
        _columns(trace, prefix, n)
    needed = ["v_bus"] + (["i_load"] + _columns(trace, "i_pu", n) if compare else [])
    missing = [c for c in needed if c not in trace.columns]
    if missing:
        raise TraceError(f"trace is missing columns: {', '.join(missing)}")
    return n


def emit_plots(
        trace_path: Union[str, Path],
        out: Optional[Union[str, Path]] = None,
        compare: Optional[Union[str, Path]] = None,
        tau: float = settings.ISE_WINDOW,
        v_ref: float = settings.V_BASE,
) -> Path:
    """
    Write a plotting script for a trace

    Args:
        trace_path: Trace CSV
        out: Script path, default <trace>_plot.py next to the trace
        compare: Second trace for the ISE-per-window panels
        tau: ISE window length
        v_ref: Voltage reference of the ISE_V panel

    Returns:
        Path of the written script

    Raises:
        TraceError: Missing file, empty trace or missing columns
    """
    trace_path = Path(trace_path).resolve()
    n = _check(trace_path, compare is not None)
    compare_path = None
    if compare is not None:
        compare_path = Path(compare).resolve()
        if _check(compare_path, True) != n:
            raise TraceError("compared traces have different converter counts")

    script = Path(out) if out else trace_path.with_name(f"{trace_path.stem}_plot.py")
    script.parent.mkdir(parents=True, exist_ok=True)
    script.write_text(_SCRIPT.format(
        name=trace_path.name,
        trace=str(trace_path),
        compare=str(compare_path) if compare_path else None,
        tau=float(tau),
        v_ref=float(v_ref),
        droops=[f"droop_{k}" for k in range(1, n + 1)],
        currents=[f"i_line_{k}" for k in range(1, n + 1)],
        voltages=[f"v_conv_{k}" for k in range(1, n + 1)],
        per_unit=[f"i_pu_{k}" for k in range(1, n + 1)],
        png=str(script.with_suffix(".png")),
    ))
    logger.info(f"📈 Plot script written to {script}")
    return script
