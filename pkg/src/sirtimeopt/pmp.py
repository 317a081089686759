"""Numerical check of the minimum-principle conditions along a candidate optimum.

The costates are integrated backward from the eradication time with
``lam_S(T) = 0`` and ``lam_I(T) = -1 / (dI/dt)(T)``, which forces the
Hamiltonian to vanish at ``T``. Along a true time-optimal pair the Hamiltonian
then stays zero, and the sign of the switching function selects the control.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .integrate import IntegratorConfig, Trajectory, kernel_coefficients
from .model import ModelParams, Policy, State, field_coefficients, vector_field
from .timeopt import OptimalResult


@dataclass
class AdjointTrajectory:
    times: np.ndarray
    lambda_s: np.ndarray
    lambda_i: np.ndarray
    psi: np.ndarray
    hamiltonian: np.ndarray
    idot_T: float


def switching_function(params: ModelParams, policy: Policy, state, lam):
    """``psi = lam . g(x)``; works elementwise on arrays."""
    s, i = state
    ls, li = lam
    if policy.is_linear:
        return -policy.alpha1 * s * ls - policy.alpha2 * i * li
    return (ls - li) * params.beta * s * i


def hamiltonian(params: ModelParams, policy: Policy, state, lam, u):
    """``H = 1 + lam . (f(x) + u g(x))``; works elementwise on arrays."""
    s, i = state
    ls, li = lam
    inf = params.beta * s * i
    base = 1.0 - ls * inf + li * (inf - params.mu * i)
    return base + u * switching_function(params, policy, state, lam)


def _last_step_control(traj: Trajectory) -> np.ndarray:
    u = np.asarray(traj.u, dtype=float).copy()
    if len(u) > 1:
        u[-1] = u[-2]
    return u


def adjoint_backward(params: ModelParams, policy: Policy, traj: Trajectory,
                     cfg: IntegratorConfig) -> AdjointTrajectory:
    """Costates, switching function and Hamiltonian on the trajectory grid."""
    if traj.eradication_time is None:
        raise ValueError("trajectory has no eradication time")
    u = _last_step_control(traj)
    terminal = State(float(traj.s[-1]), float(traj.i[-1]))
    idot = vector_field(params, policy, terminal, float(u[-1]))[1]
    if not idot < 0:
        raise ValueError(f"invalid candidate: dI/dt={idot:.3g} >= 0 at the eradication time")
    ls = np.empty(len(traj))
    li = np.empty(len(traj))
    _backend.kernels.adjoint(
        np.ascontiguousarray(traj.s, dtype=float), np.ascontiguousarray(traj.i, dtype=float),
        traj.switch_index, *kernel_coefficients(params, policy), params.mu, traj.dt,
        0.0, -1.0 / idot, ls, li)
    state = (traj.s, traj.i)
    lam = (ls, li)
    return AdjointTrajectory(
        times=traj.times, lambda_s=ls, lambda_i=li,
        psi=switching_function(params, policy, state, lam),
        hamiltonian=hamiltonian(params, policy, state, lam, u),
        idot_T=idot,
    )


@dataclass
class PMPReport:
    ham_max: float
    ham_tol: float
    psi_tol: float
    sign_violations: int
    crossings: int
    crossing_time: float
    crossing_offset: float
    wrong_direction: int
    controlled_psi_max: float
    transversality: float
    multiplier_min: float
    hamiltonian_ok: bool
    sign_ok: bool
    crossing_ok: bool
    controlled_ok: bool
    multiplier_ok: bool

    @property
    def passed(self) -> bool:
        return (self.hamiltonian_ok and self.sign_ok and self.crossing_ok
                and self.controlled_ok and self.multiplier_ok)

    def failures(self) -> list[str]:
        names = ["hamiltonian_ok", "sign_ok", "crossing_ok", "controlled_ok", "multiplier_ok"]
        return [n for n in names if not getattr(self, n)]


def tolerances(params: ModelParams, policy: Policy, traj: Trajectory) -> tuple[float, float]:
    """``(ham_tol, psi_tol)`` for a trajectory.

    ``ham_tol = 10 dt nu`` with ``nu`` the largest row-sum norm of the field
    Jacobian along the trajectory (the fastest local rate, so ``dt nu`` is
    dimensionless). ``psi_tol = ham_tol / u_max`` since the control enters
    the Hamiltonian as ``u psi``.
    """
    u = _last_step_control(traj)
    nu = 0.0
    for phase_u in {0.0, policy.u_max}:
        mask = u == phase_u
        if not mask.any():
            continue
        b, c1, c2 = field_coefficients(params, policy, phase_u)
        s = traj.s[mask]
        i = traj.i[mask]
        row1 = np.abs(-b * i - c1) + np.abs(b * s)
        row2 = np.abs(b * i) + np.abs(b * s - params.mu - c2)
        nu = max(nu, float(np.max(row1)), float(np.max(row2)))
    ham_tol = 10.0 * traj.dt * nu
    psi_tol = ham_tol / policy.u_max if policy.u_max > 0 else math.inf
    return ham_tol, psi_tol


def sign_changes(psi: np.ndarray, psi_tol: float) -> list[tuple[int, int, int]]:
    """Sign changes of ``psi`` ignoring the band ``|psi| <= psi_tol``.

    Returns ``(k_from, k_to, direction)`` where ``k_from``/``k_to`` are the last
    and first grid points outside the band on either side and ``direction`` is
    -1 for a positive to negative change.
    """
    signs = np.where(psi > psi_tol, 1, np.where(psi < -psi_tol, -1, 0))
    out = []
    last_k, last_sign = None, 0
    for k, sg in enumerate(signs):
        if sg == 0:
            continue
        if last_sign != 0 and sg != last_sign:
            out.append((last_k, k, int(sg)))
        last_k, last_sign = k, sg
    return out


def _zero_crossing(times: np.ndarray, psi: np.ndarray, k_from: int, k_to: int) -> float:
    """Linearly interpolated first zero of ``psi`` on ``[k_from, k_to]``."""
    for k in range(k_from, k_to):
        a, b = psi[k], psi[k + 1]
        if a == 0.0:
            return float(times[k])
        if (a > 0) != (b > 0):
            return float(times[k] + (times[k + 1] - times[k]) * a / (a - b))
    return 0.5 * float(times[k_from] + times[k_to])


def check_pmp(params: ModelParams, policy: Policy, result: OptimalResult,
              cfg: IntegratorConfig, trajectory: Trajectory | None = None) -> PMPReport:
    """Evaluate the minimum-principle conditions along ``result.trajectory``.

    ``trajectory`` overrides the candidate (used to test deliberately wrong
    schedules). Failures are reported, never raised.
    """
    traj = result.trajectory if trajectory is None else trajectory
    adj = adjoint_backward(params, policy, traj, cfg)
    ham_tol, psi_tol = tolerances(params, policy, traj)
    u = _last_step_control(traj)
    psi = adj.psi
    n = len(traj) - 1
    body = slice(0, n)

    on = u[body] > 0
    sign_viol = int(np.sum((psi[body] > psi_tol) & on) + np.sum((psi[body] < -psi_tol) & ~on))

    changes = sign_changes(psi[body], psi_tol)
    wrong = sum(1 for c in changes if c[2] != -1)
    if changes:
        crossing_time = _zero_crossing(traj.times, psi, *changes[0][:2])
        crossing_offset = crossing_time - traj.tau
    else:
        crossing_time = crossing_offset = math.nan

    k_sw = traj.switch_index
    ctrl = psi[k_sw:n]
    controlled_max = float(np.max(ctrl)) if len(ctrl) else -math.inf

    ham_max = float(np.max(np.abs(adj.hamiltonian)))
    mult = float(np.min(np.maximum(np.abs(adj.lambda_s), np.abs(adj.lambda_i))))
    return PMPReport(
        ham_max=ham_max, ham_tol=ham_tol, psi_tol=psi_tol,
        sign_violations=sign_viol, crossings=len(changes),
        crossing_time=float(crossing_time), crossing_offset=float(crossing_offset),
        wrong_direction=wrong, controlled_psi_max=controlled_max,
        transversality=abs(float(adj.lambda_s[-1])), multiplier_min=mult,
        hamiltonian_ok=ham_max <= ham_tol,
        sign_ok=sign_viol == 0,
        crossing_ok=len(changes) <= 1 and wrong == 0,
        controlled_ok=controlled_max <= psi_tol,
        multiplier_ok=mult > 0,
    )


REPORT_COLUMNS = list(PMPReport.__dataclass_fields__) + ["passed"]


def write_report_csv(report: PMPReport, path: str | Path) -> None:
    row = asdict(report)
    row["passed"] = report.passed
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_adjoint_csv(adj: AdjointTrajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "lambda_S", "lambda_I", "psi", "H"])
        for row in zip(adj.times, adj.lambda_s, adj.lambda_i, adj.psi, adj.hamiltonian):
            w.writerow([repr(float(v)) for v in row])
