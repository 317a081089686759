"""Fixed-step Crank-Nicolson integration with eradication detection."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _backend
from .model import ModelParams, Policy, PolicyKind, State, field_coefficients

STEPS_PER_TUNC = 5000
HORIZON_FACTOR = 50.0


class IntegrationError(RuntimeError):
    """The implicit step did not converge; retry with a smaller ``dt``."""


class NegativeStateError(IntegrationError):
    """A state component went negative by more than the solver tolerance."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_horizon: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 25

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt: must be > 0, got {self.dt}")
        if not self.t_horizon > 0:
            raise ValueError(f"t_horizon: must be > 0, got {self.t_horizon}")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol: must be > 0, got {self.newton_tol}")
        if self.newton_max_iter < 1:
            raise ValueError(f"newton_max_iter: must be >= 1, got {self.newton_max_iter}")

    @property
    def k_max(self) -> int:
        return int(math.floor(self.t_horizon / self.dt + 1e-9))

    def index(self, t: float) -> int:
        """Nearest grid index of time ``t``."""
        return int(round(t / self.dt))


@dataclass(frozen=True)
class ControlSchedule:
    """Bang-bang control ``u = 0`` on ``[0, tau)`` and ``u_max`` from ``tau`` on."""

    tau: float
    u_max: float

    def __post_init__(self) -> None:
        if not self.tau >= 0:
            raise ValueError(f"tau: must be >= 0, got {self.tau}")
        if not self.u_max >= 0:
            raise ValueError(f"u_max: must be >= 0, got {self.u_max}")

    def control(self, t: float) -> float:
        return self.u_max if t >= self.tau else 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    s: np.ndarray
    i: np.ndarray
    u: np.ndarray
    dt: float
    tau: float
    eradication_time: float | None
    status: str
    t_cross: float = math.nan
    worst_negative: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def states(self) -> list[State]:
        return [State(float(a), float(b)) for a, b in zip(self.s, self.i)]

    @property
    def switch_index(self) -> int:
        return int(round(self.tau / self.dt))

    @property
    def final_state(self) -> State:
        return State(float(self.s[-1]), float(self.i[-1]))

    @property
    def eradicated(self) -> bool:
        return self.eradication_time is not None


def kernel_coefficients(params: ModelParams, policy: Policy) -> tuple[float, ...]:
    """``(b0, c10, c20, b1, c11, c21)`` for the uncontrolled and controlled phases."""
    return field_coefficients(params, policy, 0.0) + field_coefficients(params, policy, policy.u_max)


def _raise_for(status: int, k: int, dt: float, worst: float) -> None:
    k_ = _backend.kernels
    if status == k_.STEP_FAILURE:
        raise IntegrationError(f"implicit step failed at t={k * dt:.6g} (dt={dt:.3g}); halve dt")
    if status == k_.NEGATIVE_STATE:
        raise NegativeStateError(f"state component {worst:.3g} < 0 beyond tolerance at t={k * dt:.6g}")


def step(params: ModelParams, policy: Policy, state: State, u: float, cfg: IntegratorConfig) -> State:
    """Advance one Crank-Nicolson step of size ``cfg.dt`` with control ``u`` held fixed."""
    if not 0 <= u <= policy.u_max:
        raise ValueError(f"u: control must lie in [0, {policy.u_max}], got {u}")
    if state.s < 0 or state.i < 0:
        raise ValueError(f"state: components must be >= 0, got {state}")
    b, c1, c2 = field_coefficients(params, policy, u)
    ok, s, i = _backend.kernels.cn_step(b, c1, c2, params.mu, state.s, state.i,
                                        cfg.dt, cfg.newton_tol, cfg.newton_max_iter)
    if not ok:
        raise IntegrationError(f"implicit step failed from {state} with dt={cfg.dt}")
    floor = -cfg.newton_tol * max(1.0, abs(state.s), abs(state.i))
    if s < floor or i < floor:
        raise NegativeStateError(f"step produced negative state ({s}, {i})")
    return State(max(s, 0.0), max(i, 0.0))


def simulate(params: ModelParams, policy: Policy, schedule: ControlSchedule,
             cfg: IntegratorConfig) -> Trajectory:
    """Integrate under ``schedule`` until the first grid point with ``I <= eps``.

    ``schedule.tau`` is snapped to the nearest grid time. If the horizon runs out
    first, the trajectory comes back with ``eradication_time=None`` and
    ``status="horizon"``.
    """
    if schedule.u_max != policy.u_max:
        policy = policy.with_u_max(schedule.u_max)
    k_switch = cfg.index(schedule.tau)
    k_max = cfg.k_max
    s_out = np.empty(k_max + 1)
    i_out = np.empty(k_max + 1)
    s_out[0] = params.s0
    i_out[0] = params.i0
    status, k_end, _, _, t_cross, worst = _backend.kernels.integrate(
        *kernel_coefficients(params, policy), params.mu, params.s0, params.i0,
        0, k_switch, k_max, cfg.dt, params.epsilon, cfg.newton_tol, cfg.newton_max_iter,
        s_out, i_out)
    _raise_for(status, k_end, cfg.dt, worst)
    n = k_end + 1
    times = np.arange(n) * cfg.dt
    u = np.where(np.arange(n) >= k_switch, policy.u_max, 0.0)
    eradicated = status == _backend.kernels.ERADICATED
    return Trajectory(
        times=times, s=s_out[:n].copy(), i=i_out[:n].copy(), u=u, dt=cfg.dt,
        tau=k_switch * cfg.dt,
        eradication_time=k_end * cfg.dt if eradicated else None,
        status="eradicated" if eradicated else "horizon",
        t_cross=t_cross, worst_negative=worst,
    )


def uncontrolled_eradication_time(params: ModelParams, cfg: IntegratorConfig) -> float:
    traj = simulate(params, Policy(PolicyKind.VACCINATION, 0.0), ControlSchedule(0.0, 0.0), cfg)
    if traj.eradication_time is None:
        raise IntegrationError(f"uncontrolled epidemic not eradicated within t_horizon={cfg.t_horizon}")
    return traj.eradication_time


def peak_time(traj: Trajectory) -> float:
    """Grid time of the maximum of I (earliest on ties)."""
    return float(traj.times[int(np.argmax(traj.i))])


def default_config(params: ModelParams, policy: Policy | None = None, **overrides) -> IntegratorConfig:
    """Step size resolving the fastest linear rate and ``T_unc / 5000``.

    ``T_unc`` is estimated with a fine provisional step; the horizon is
    ``50 * T_unc``.
    """
    u_max = policy.u_max if policy is not None else 0.0
    rate = max(params.mu, params.beta * params.s0)
    probe = IntegratorConfig(dt=0.02 / rate, t_horizon=2e6 * 0.02 / rate)
    t_unc = uncontrolled_eradication_time(params, probe)
    dt = min(0.2 / params.mu, 0.2 / (params.mu + u_max), t_unc / STEPS_PER_TUNC)
    cfg = IntegratorConfig(dt=dt, t_horizon=HORIZON_FACTOR * t_unc)
    return replace(cfg, **overrides) if overrides else cfg


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "S", "I", "u"])
        for row in zip(traj.times, traj.s, traj.i, traj.u):
            w.writerow([_fmt(v) for v in row])
