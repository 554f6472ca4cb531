"""
Closed-Loop Reference Model Adaptive Controller
Scalar first-order plants with unknown (a, b) and known sign(b): normalized
estimation error, parameter projection and adaptation gain scheduling
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import ControllerFault, ModelInvalidError
from app.models.schemas import CrmConfig
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass
class CrmState:
    theta: np.ndarray
    b_hat: float
    x_m: float
    phi_n: np.ndarray = field(default_factory=lambda: np.zeros(2))
    u_n: float = 0.0
    gamma_k: float = 0.0


@dataclass(frozen=True)
class CrmDiagnostics:
    e: float
    e_hat: float
    eps: float
    m: float
    lyapunov_v: Optional[float] = None


def scheduled_gain(config: CrmConfig, r_k: float) -> float:
    """gamma_0 / alpha_k**2 with alpha_k = max(|r_k|/r_0, alpha_min)"""
    alpha = max(abs(r_k) / config.r_0, config.alpha_min)
    return config.gamma_0 / alpha ** 2


def project_theta(theta_dot_0: np.ndarray, theta: np.ndarray, m_theta: float) -> np.ndarray:
    """
    Projection of a parameter derivative onto the ball of radius m_theta

    Inside the ball, or on its boundary with an inward update, the derivative
    is returned unchanged. Otherwise its radial component is removed.
    """
    norm_sq = float(theta @ theta)
    if norm_sq < m_theta ** 2 or float(theta_dot_0 @ theta) <= 0:
        return theta_dot_0
    return theta_dot_0 - theta * (float(theta @ theta_dot_0) / norm_sq)


def _rk4_linear(x: Union[float, np.ndarray], pole: float, drive, h: float):
    """One RK4 step of x' = pole*x + drive with drive held"""
    k1 = pole * x + drive
    k2 = pole * (x + 0.5 * h * k1) + drive
    k3 = pole * (x + 0.5 * h * k2) + drive
    k4 = pole * (x + h * k3) + drive
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class CrmController:
    """
    One adaptive loop

    The controller is advanced once per control period by update(). The
    individual steps are public so tests can drive them separately.
    """

    def __init__(
            self,
            config: CrmConfig,
            x0: float = 0.0,
            theta_init: Optional[Tuple[float, float]] = None,
            name: str = "",
    ):
        if config.a_m + config.l >= 0:
            raise ModelInvalidError("a_m + l must be negative")
        self.config = config
        self.name = name
        self.sign_b = config.sign_b
        self.frozen = False
        self.last: Optional[CrmDiagnostics] = None
        theta = config.theta_init if theta_init is None else theta_init
        self.state = CrmState(
            theta=np.array(theta, dtype=float),
            b_hat=config.sign_b * config.b_init,
            x_m=float(x0),
            gamma_k=config.gamma_0,
        )

    @property
    def filter_pole(self) -> float:
        return self.config.a_m + self.config.l

    def reference_step(self, r: float, e: float, dt: float) -> float:
        """x_m' = a_m*x_m + b_m*r - l*e, inputs held over dt"""
        cfg = self.config
        self.state.x_m = float(_rk4_linear(self.state.x_m, cfg.a_m, cfg.b_m * r - cfg.l * e, dt))
        return self.state.x_m

    def control_output(self, x: float, r: float) -> float:
        return float(self.state.theta @ np.array([x, r]))

    def filter_step(self, x: float, r: float, u: float, dt: float) -> Tuple[np.ndarray, float]:
        """Filter [x, r] and u through 1/(s - a_m - l)"""
        pole = self.filter_pole
        self.state.phi_n = _rk4_linear(self.state.phi_n, pole, np.array([x, r]), dt)
        self.state.u_n = float(_rk4_linear(self.state.u_n, pole, u, dt))
        return self.state.phi_n, self.state.u_n

    def modeling_error(self, e: float) -> Tuple[float, float, float]:
        """
        Normalized modeling error

        Returns:
            (eps, m, e_hat)
        """
        s = self.state
        e_hat = s.b_hat * (s.u_n - float(s.theta @ s.phi_n))
        m = math.sqrt(1.0 + float(s.phi_n @ s.phi_n) + s.u_n ** 2)
        return (e - e_hat) / m ** 2, m, e_hat

    def adapt_step(self, e: float, dt: float, phi: Optional[np.ndarray] = None) -> None:
        """
        Projected gradient update of (theta, b_hat) over dt

        Raises:
            ControllerFault: The update is not finite; the state is left untouched
        """
        cfg = self.config
        s = self.state
        gamma = s.gamma_k
        eps, m, e_hat = self.modeling_error(e)

        if cfg.legacy_unnormalized:
            # unnormalized law on the raw regressor, b_hat is not estimated
            regressor = s.phi_n if phi is None else phi
            theta_dot = -self.sign_b * gamma * regressor * e
            b_dot = 0.0
        else:
            theta_dot = -self.sign_b * gamma * s.phi_n * eps
            xi = s.u_n - float(s.theta @ s.phi_n)
            b_dot = gamma * xi * eps

        theta_dot = project_theta(theta_dot, s.theta, cfg.m_theta)
        if abs(s.b_hat) >= cfg.m_b and s.b_hat * b_dot > 0:
            b_dot = 0.0

        theta = s.theta + dt * theta_dot
        b_hat = s.b_hat + dt * b_dot
        if not (np.all(np.isfinite(theta)) and math.isfinite(b_hat)):
            raise ControllerFault(f"non-finite adaptive update (eps={eps})", self.name)

        norm = float(np.linalg.norm(theta))
        if norm > cfg.m_theta + cfg.projection_tol:
            theta = theta * (cfg.m_theta / norm)
        s.theta = theta
        s.b_hat = float(np.clip(b_hat, -cfg.m_b, cfg.m_b))
        self.last = CrmDiagnostics(e=e, e_hat=e_hat, eps=eps, m=m)

    def lyapunov_value(self, true_a: float, true_b: float) -> float:
        """Lyapunov function of the parameter errors against the matching parameters"""
        cfg = self.config
        theta_star = np.array([(cfg.a_m - true_a) / true_b, cfg.b_m / true_b])
        theta_err = self.state.theta - theta_star
        b_err = self.state.b_hat - true_b
        gamma = self.state.gamma_k
        return abs(true_b) * float(theta_err @ theta_err) / (2.0 * gamma) + b_err ** 2 / (2.0 * gamma)

    def update(self, x: float, r: float, dt: float) -> float:
        """
        Run one control period and return the control output

        Order: tracking error, scheduled gain, adaptation, output with the
        updated parameters, then filter and reference model over dt.
        """
        if dt <= 0:
            raise ModelInvalidError("controller period must be positive")
        cfg = self.config
        e = x - self.state.x_m
        self.state.gamma_k = scheduled_gain(cfg, r) if cfg.gain_scheduling else cfg.gamma_0

        if self.frozen:
            eps, m, e_hat = self.modeling_error(e)
            self.last = CrmDiagnostics(e=e, e_hat=e_hat, eps=eps, m=m)
        else:
            self.adapt_step(e, dt, phi=np.array([x, r]))

        u = self.control_output(x, r)
        self.filter_step(x, r, u, dt)
        self.reference_step(r, e, dt)
        return u

    def reset(self, x: float, sign_b: Optional[int] = None) -> None:
        """
        Bumpless activation: reference model at the measurement, filters cleared

        With sign_b, the known sign of b is updated and b_hat is moved to that
        side of zero.
        """
        self.state.x_m = float(x)
        self.state.phi_n = np.zeros(2)
        self.state.u_n = 0.0
        if sign_b is not None:
            self.sign_b = sign_b
            self.state.b_hat = sign_b * abs(self.state.b_hat)

    def freeze(self) -> None:
        if not self.frozen:
            logger.warning(f"🧊 Adaptation frozen for loop {self.name or '?'}")
        self.frozen = True


# ============================================================================
# SCALAR TEST PLANT
# ============================================================================

@dataclass(frozen=True)
class ScalarRun:
    """Per-tick history of a scalar closed loop"""
    t: np.ndarray
    x: np.ndarray
    x_m: np.ndarray
    u: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    b_hat: np.ndarray
    m: np.ndarray
    phi_n: np.ndarray
    u_n: np.ndarray
    eps: np.ndarray
    gamma_k: np.ndarray
    lyapunov: np.ndarray


Reference = Union[float, Callable[[float], float]]


def simulate_first_order(
        a: float,
        b: float,
        config: CrmConfig,
        reference: Reference,
        duration: float,
        control_dt: float = 0.01,
        x0: float = 0.0,
) -> ScalarRun:
    """
    Closed loop of x' = a*x + b*u under a CrmController

    The plant is discretised exactly under a zero-order hold on u.
    """
    ref = reference if callable(reference) else (lambda _t, _r=float(reference): _r)
    n_ticks = int(round(duration / control_dt))
    ctrl = CrmController(config, x0=x0, name="scalar")

    growth = math.exp(a * control_dt)
    input_gain = b * math.expm1(a * control_dt) / a if a != 0 else b * control_dt

    hist = {k: np.empty(n_ticks) for k in ("t", "x", "x_m", "u", "r", "b_hat", "m", "u_n", "eps", "gamma_k", "lyapunov")}
    theta = np.empty((n_ticks, 2))
    phi_n = np.empty((n_ticks, 2))

    x = float(x0)
    for k in range(n_ticks):
        t = k * control_dt
        r = ref(t)
        x_m = ctrl.state.x_m
        # filter states used by this tick's normalization
        phi_n[k] = ctrl.state.phi_n
        hist["u_n"][k] = ctrl.state.u_n
        u = ctrl.update(x, r, control_dt)
        diag = ctrl.last

        hist["t"][k] = t
        hist["x"][k] = x
        hist["x_m"][k] = x_m
        hist["u"][k] = u
        hist["r"][k] = r
        hist["b_hat"][k] = ctrl.state.b_hat
        hist["m"][k] = diag.m
        hist["eps"][k] = diag.eps
        hist["gamma_k"][k] = ctrl.state.gamma_k
        hist["lyapunov"][k] = ctrl.lyapunov_value(a, b)
        theta[k] = ctrl.state.theta

        x = growth * x + input_gain * u

    return ScalarRun(theta=theta, phi_n=phi_n, **hist)
