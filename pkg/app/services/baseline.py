"""
PI Baseline
Fixed-gain secondary controller driven by the same consensus errors as the adaptive loops
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.core.exceptions import ModelInvalidError
from app.models.schemas import PiConfig


@dataclass
class PiState:
    integ_v: float = 0.0
    integ_i: float = 0.0


class PiController:
    """
    Two PI loops producing droop corrections

    Outputs are R = -(kp*e + integ): a positive error lowers the droop, which
    raises the terminal voltage and the converter's share of the current.
    """

    def __init__(self, config: PiConfig):
        self.config = config

    def _clamp(self, value: float) -> float:
        return float(np.clip(value, -self.config.clamp, self.config.clamp))

    def pi_step(self, state: PiState, e_v: float, e_i: float, dt: float) -> Tuple[float, float]:
        """
        Advance both integrators by dt and return (R_V, R_I)

        Args:
            state: Integrator state, updated in place
            e_v: 1 - v_bar_pu
            e_i: i_ref_pu - i_pu
            dt: Controller period
        """
        if dt <= 0:
            raise ModelInvalidError("controller period must be positive")
        cfg = self.config
        state.integ_v = self._clamp(state.integ_v + cfg.ki_v * e_v * dt)
        state.integ_i = self._clamp(state.integ_i + cfg.ki_i * e_i * dt)
        return -(cfg.kp_v * e_v + state.integ_v), -(cfg.kp_i * e_i + state.integ_i)

    def warm_states(self, droop_offsets: np.ndarray) -> list[PiState]:
        """
        Integrator states whose zero-error outputs add up to the given droop offsets

        The common part goes to the voltage integrators and the remainder to the
        current integrators.
        """
        offsets = np.asarray(droop_offsets, dtype=float)
        common = float(offsets.mean())
        return [
            PiState(integ_v=self._clamp(-common), integ_i=self._clamp(-(d - common)))
            for d in offsets
        ]

    def bumpless_integrator(self, kp: float, e: float) -> float:
        """Integrator value that makes the output zero at activation"""
        return self._clamp(-kp * e)
