"""Minimise the eradication time over single-switch bang-bang schedules.

Every admissible schedule is fixed by its starting intervention time ``tau``,
so the problem reduces to a scalar scan of ``J(tau)`` over ``[0, T_unc]``.
Before ``tau`` every schedule follows the uncontrolled trajectory, which is
computed once; each ``J(tau_i)`` then only integrates the controlled tail.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .integrate import (
    ControlSchedule,
    IntegrationError,
    IntegratorConfig,
    Trajectory,
    _raise_for,
    default_config,
    kernel_coefficients,
    peak_time,
    simulate,
)
from .model import ModelParams, Policy, r0, rc

DEFAULT_MESH = 400

__all__ = [
    "ControlSchedule",
    "OptimalResult",
    "OptimizationError",
    "RegimeClass",
    "classify",
    "eradication_time_for_tau",
    "optimize",
]


class OptimizationError(RuntimeError):
    def __init__(self, tau: float, cause: Exception):
        super().__init__(f"integration failed at tau={tau:.6g}: {cause}")
        self.tau = tau
        self.cause = cause


class RegimeClass(str, enum.Enum):
    CONSTANT_MAX = "ConstantMax"
    DELAYED_BEFORE_PEAK = "DelayedBeforePeak"
    DELAYED_AT_PEAK = "DelayedAtPeak"
    DELAYED_AFTER_PEAK = "DelayedAfterPeak"

    @property
    def delayed(self) -> bool:
        return self is not RegimeClass.CONSTANT_MAX


@dataclass
class OptimalResult:
    tau_star: float
    T_star: float
    T_at_zero: float
    regime: RegimeClass
    trajectory: Trajectory
    s_at_Tstar: float
    s_at_Tzero: float
    T_unc: float
    dt: float
    plateau: bool = False
    t_cross_star: float = math.nan
    scan_taus: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    scan_T: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


def eradication_time_for_tau(params: ModelParams, policy: Policy, tau: float,
                             cfg: IntegratorConfig) -> float:
    """``J(tau)``; ``inf`` if the horizon is reached first."""
    traj = simulate(params, policy, ControlSchedule(tau, policy.u_max), cfg)
    return math.inf if traj.eradication_time is None else traj.eradication_time


class _TauScanner:
    """Evaluate ``J`` at grid indices, reusing the uncontrolled prefix."""

    def __init__(self, params: ModelParams, policy: Policy, cfg: IntegratorConfig):
        self.params = params
        self.policy = policy
        self.cfg = cfg
        self.coeffs = kernel_coefficients(params, policy)
        try:
            self.unc = simulate(params, policy, ControlSchedule(0.0, 0.0), cfg)
        except IntegrationError as exc:
            raise OptimizationError(0.0, exc) from exc
        if not self.unc.eradicated:
            raise OptimizationError(0.0, IntegrationError("uncontrolled epidemic not eradicated within horizon"))
        self.k_unc = len(self.unc) - 1
        # k_tau -> (k_T, t_cross, S(T)); k_T = -1 marks "pruned or not eradicated"
        self.values: dict[int, tuple[int, float, float]] = {}

    def evaluate(self, k_tau: int, k_limit: int | None = None) -> tuple[int, float, float]:
        if k_tau in self.values and (self.values[k_tau][0] >= 0 or k_limit is not None):
            return self.values[k_tau]
        if k_tau >= self.k_unc:
            out = (self.k_unc, self.unc.t_cross, float(self.unc.s[-1]))
            self.values[k_tau] = out
            return out
        cfg = self.cfg
        k_max = cfg.k_max if k_limit is None else min(cfg.k_max, k_limit)
        k = _backend.kernels
        status, k_end, s_end, _, t_cross, worst = k.integrate(
            *self.coeffs, self.params.mu, float(self.unc.s[k_tau]), float(self.unc.i[k_tau]),
            k_tau, k_tau, k_max, cfg.dt, self.params.epsilon, cfg.newton_tol, cfg.newton_max_iter)
        try:
            _raise_for(status, k_end, cfg.dt, worst)
        except IntegrationError as exc:
            raise OptimizationError(k_tau * cfg.dt, exc) from exc
        out = (k_end, t_cross, s_end) if status == k.ERADICATED else (-1, math.inf, math.nan)
        self.values[k_tau] = out
        return out


def _key(k_tau: int, value: tuple[int, float, float]) -> tuple[float, float, int]:
    k_T, t_cross, _ = value
    if k_T < 0:
        return (math.inf, math.inf, k_tau)
    return (k_T, t_cross, k_tau)


def _mesh_indices(k_unc: int, mesh_count: int) -> np.ndarray:
    step = max(1, int(round(k_unc / (mesh_count - 1))))
    idx = np.arange(0, k_unc + 1, step)
    if idx[-1] != k_unc:
        idx = np.append(idx, k_unc)
    return idx


def optimize(params: ModelParams, policy: Policy, mesh_count: int = DEFAULT_MESH,
             cfg: IntegratorConfig | None = None, peak_tol: float | None = None,
             prune: bool = True) -> OptimalResult:
    """Scan ``J(tau)`` on a uniform mesh over ``[0, T_unc]`` plus one local refinement.

    The mesh spacing is a whole number of time steps. Among equal grid
    eradication times the interpolated threshold crossing decides, then the
    smallest ``tau``. With ``prune=True`` a run is cut off once it passes the
    best time found so far by more than two steps; its ``J`` is then reported as
    ``inf`` in ``scan_T``, which never changes the minimiser.
    """
    if mesh_count < 2:
        raise ValueError(f"mesh_count: must be >= 2, got {mesh_count}")
    if cfg is None:
        cfg = default_config(params, policy)
    scan = _TauScanner(params, policy, cfg)
    k_unc = scan.k_unc

    zero = scan.evaluate(0)
    if zero[0] < 0:
        raise OptimizationError(0.0, IntegrationError("tau=0 schedule not eradicated within horizon"))

    best_k = min(zero[0], k_unc)

    def limit() -> int | None:
        return best_k + 2 if prune else None

    coarse = _mesh_indices(k_unc, mesh_count)
    for k_tau in coarse:
        v = scan.evaluate(int(k_tau), limit())
        if 0 <= v[0] < best_k:
            best_k = v[0]

    j = min(range(len(coarse)), key=lambda n: _key(int(coarse[n]), scan.values[int(coarse[n])]))
    lo = int(coarse[max(j - 1, 0)])
    hi = int(coarse[min(j + 1, len(coarse) - 1)])
    if hi - lo + 1 <= mesh_count:
        fine = np.arange(lo, hi + 1)
    else:
        fine = np.unique(np.round(np.linspace(lo, hi, mesh_count)).astype(int))
    for k_tau in fine:
        v = scan.evaluate(int(k_tau), limit())
        if 0 <= v[0] < best_k:
            best_k = v[0]

    k_star = min(scan.values, key=lambda k: _key(k, scan.values[k]))
    k_T, t_cross_star, _ = scan.values[k_star]

    coarse_T = np.array([scan.values[int(k)][0] for k in coarse], dtype=float)
    near = (coarse_T >= 0) & (coarse_T <= k_T + 2)
    run = longest = 0
    for flag in near:
        run = run + 1 if flag else 0
        longest = max(longest, run)

    traj = simulate(params, policy, ControlSchedule(k_star * cfg.dt, policy.u_max), cfg)
    if traj.eradication_time is None or len(traj) - 1 != k_T:
        raise OptimizationError(k_star * cfg.dt, IntegrationError("re-simulation disagrees with scan"))

    taus = np.array(sorted(scan.values), dtype=float)
    Ts = np.array([scan.values[int(k)][0] for k in taus], dtype=float)
    Ts = np.where(Ts >= 0, Ts * cfg.dt, np.inf)

    result = OptimalResult(
        tau_star=k_star * cfg.dt,
        T_star=k_T * cfg.dt,
        T_at_zero=zero[0] * cfg.dt,
        regime=RegimeClass.CONSTANT_MAX,
        trajectory=traj,
        s_at_Tstar=float(traj.s[-1]),
        s_at_Tzero=zero[2],
        T_unc=k_unc * cfg.dt,
        dt=cfg.dt,
        plateau=longest >= 3,
        t_cross_star=t_cross_star,
        scan_taus=taus * cfg.dt,
        scan_T=Ts,
    )
    result.regime = classify(result, traj, 3 * cfg.dt if peak_tol is None else peak_tol, cfg)
    return result


def classify(result: OptimalResult, traj: Trajectory, peak_tol: float,
             cfg: IntegratorConfig) -> RegimeClass:
    """Place the optimum in one of the four regimes by comparing ``tau*`` to the peak."""
    if result.tau_star < cfg.dt:
        return RegimeClass.CONSTANT_MAX
    t_p = peak_time(traj)
    if result.tau_star < t_p - peak_tol:
        return RegimeClass.DELAYED_BEFORE_PEAK
    if result.tau_star > t_p + peak_tol:
        return RegimeClass.DELAYED_AFTER_PEAK
    return RegimeClass.DELAYED_AT_PEAK


RESULT_COLUMNS = ["policy", "beta", "mu", "s0", "i0", "eps", "u_max", "R0", "RC",
                  "tau_star", "T_star", "T_at_zero", "s_at_Tstar", "s_at_Tzero", "regime"]


def result_row(params: ModelParams, policy: Policy, result: OptimalResult) -> dict:
    return {
        "policy": policy.kind.value, "beta": params.beta, "mu": params.mu, "s0": params.s0,
        "i0": params.i0, "eps": params.epsilon, "u_max": policy.u_max,
        "R0": r0(params), "RC": rc(params, policy),
        "tau_star": result.tau_star, "T_star": result.T_star, "T_at_zero": result.T_at_zero,
        "s_at_Tstar": result.s_at_Tstar, "s_at_Tzero": result.s_at_Tzero,
        "regime": result.regime.value,
    }
