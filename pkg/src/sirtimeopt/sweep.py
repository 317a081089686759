"""Parameter-grid experiments: regime maps, u_max curves, transition detection."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrate import IntegrationError, IntegratorConfig, default_config
from .model import ModelParams, Policy, PolicyKind, r0, rc
from .timeopt import DEFAULT_MESH, OptimizationError, RegimeClass, optimize

WORKERS_ENV = "SIRTIMEOPT_WORKERS"
FAILED = "Failed"
SCALARS = ("tau_star", "T_star", "T_at_zero", "s_at_Tstar", "s_at_Tzero", "RC")


def worker_count(requested: int | None = None) -> int:
    """Number of worker processes, capped by ``$SIRTIMEOPT_WORKERS``."""
    cap = os.environ.get(WORKERS_ENV)
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def _pmap(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


@dataclass(frozen=True)
class SweepSpec:
    """Grid over ``x`` (``u_max`` or ``i0``) and ``R0`` with ``beta = R0 mu / s0``."""

    policy: PolicyKind
    x_axis: str = "u_max"
    x_lo: float = 0.1
    x_hi: float = 5.0
    n_x: int = 60
    r0_lo: float = 1.05
    r0_hi: float = 5.0
    n_y: int = 60
    s0: float = 2000.0
    i0: float = 1.0
    mu: float = 5.0
    eps: float = 0.5
    u_max: float = 1.0
    mesh_count: int = DEFAULT_MESH
    dt: float | None = None
    t_horizon: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "policy", PolicyKind.parse(self.policy))
        if self.x_axis not in ("u_max", "i0"):
            raise ValueError(f"x_axis: must be 'u_max' or 'i0', got {self.x_axis!r}")
        if self.n_x < 2 or self.n_y < 2:
            raise ValueError("n_x, n_y: must be >= 2")
        if not (0 <= self.x_lo < self.x_hi):
            raise ValueError(f"x range: need 0 <= x_lo < x_hi, got [{self.x_lo}, {self.x_hi}]")
        if not (0 < self.r0_lo < self.r0_hi):
            raise ValueError(f"R0 range: need 0 < r0_lo < r0_hi, got [{self.r0_lo}, {self.r0_hi}]")

    @property
    def x_values(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.n_x)

    @property
    def y_values(self) -> np.ndarray:
        return np.linspace(self.r0_lo, self.r0_hi, self.n_y)

    def cell(self, x: float, r0_value: float) -> tuple[ModelParams, Policy]:
        i0 = x if self.x_axis == "i0" else self.i0
        u = x if self.x_axis == "u_max" else self.u_max
        params = ModelParams.from_r0(r0_value, mu=self.mu, s0=self.s0, i0=i0, epsilon=self.eps)
        return params, Policy(self.policy, u)

    def config_for(self, params: ModelParams, policy: Policy) -> IntegratorConfig:
        overrides = {k: v for k, v in (("dt", self.dt), ("t_horizon", self.t_horizon)) if v is not None}
        return default_config(params, policy, **overrides)


def _solve_cell(args) -> dict:
    params, policy, cfg, mesh_count = args
    row = {"RC": rc(params, policy)}
    try:
        if cfg is None:
            cfg = default_config(params, policy)
        res = optimize(params, policy, mesh_count, cfg)
    except (IntegrationError, OptimizationError) as exc:
        row.update({k: math.nan for k in SCALARS if k != "RC"})
        row.update(regime=FAILED, plateau=False, dt=math.nan, T_unc=math.nan, error=str(exc))
        return row
    row.update(
        regime=res.regime.value, tau_star=res.tau_star, T_star=res.T_star,
        T_at_zero=res.T_at_zero, s_at_Tstar=res.s_at_Tstar, s_at_Tzero=res.s_at_Tzero,
        plateau=res.plateau, dt=res.dt, T_unc=res.T_unc, error="",
    )
    return row


@dataclass
class RegimeMap:
    spec: SweepSpec
    x: np.ndarray
    y: np.ndarray
    regime: np.ndarray            # (n_x, n_y) of str
    values: dict[str, np.ndarray]  # each (n_x, n_y)
    plateau: np.ndarray
    errors: dict[tuple[int, int], str] = field(default_factory=dict)

    def count(self, regime: RegimeClass | str) -> int:
        name = regime.value if isinstance(regime, RegimeClass) else regime
        return int(np.sum(self.regime == name))


def run_map(spec: SweepSpec, workers: int | None = None) -> RegimeMap:
    """Optimise and classify every grid cell; failed cells are kept as ``Failed``."""
    xs, ys = spec.x_values, spec.y_values
    jobs = []
    for x in xs:
        for y in ys:
            params, policy = spec.cell(float(x), float(y))
            cfg = spec.config_for(params, policy) if (spec.dt or spec.t_horizon) else None
            jobs.append((params, policy, cfg, spec.mesh_count))
    rows = _pmap(_solve_cell, jobs, worker_count(workers))

    shape = (len(xs), len(ys))
    regime = np.empty(shape, dtype=object)
    plateau = np.zeros(shape, dtype=bool)
    values = {k: np.full(shape, np.nan) for k in SCALARS}
    errors = {}
    for n, row in enumerate(rows):
        ix, iy = divmod(n, len(ys))
        regime[ix, iy] = row["regime"]
        plateau[ix, iy] = row["plateau"]
        for k in SCALARS:
            values[k][ix, iy] = row[k]
        if row["error"]:
            errors[(ix, iy)] = row["error"]
    return RegimeMap(spec, xs, ys, regime, values, plateau, errors)


@dataclass
class CurveTable:
    policy: PolicyKind
    params: ModelParams
    u_max: np.ndarray
    values: dict[str, np.ndarray]
    regime: list[str]
    dt: float
    T_unc: float
    rc_one: float | None
    cfg: IntegratorConfig | None = None
    mesh_count: int = DEFAULT_MESH

    def __len__(self) -> int:
        return len(self.u_max)


def rc_unity(params: ModelParams, kind: PolicyKind) -> float | None:
    """The ``u_max`` at which the control reproduction number equals one."""
    kind = PolicyKind.parse(kind)
    if kind is PolicyKind.VACCINATION:
        return None
    if kind is PolicyKind.REDUCTION:
        return 1.0 - 1.0 / r0(params) if r0(params) > 1 else None
    u = params.beta * params.s0 - params.mu
    return u if u > 0 else None


def run_curves(policy: PolicyKind | str, params: ModelParams, u_lo: float, u_hi: float,
               n: int = 200, cfg: IntegratorConfig | None = None,
               mesh_count: int = DEFAULT_MESH, workers: int | None = None) -> CurveTable:
    """Optimal quantities along a ``u_max`` grid, all sharing one step size.

    The step comes from the default rule evaluated at ``u_hi`` unless ``cfg`` is given.
    """
    kind = PolicyKind.parse(policy)
    if n < 2:
        raise ValueError(f"n: must be >= 2, got {n}")
    if not 0 <= u_lo < u_hi:
        raise ValueError(f"u_max range: need 0 <= lo < hi, got [{u_lo}, {u_hi}]")
    if cfg is None:
        cfg = default_config(params, Policy(kind, u_hi))
    us = np.linspace(u_lo, u_hi, n)
    rows = _pmap(_solve_cell, [(params, Policy(kind, float(u)), cfg, mesh_count) for u in us],
                 worker_count(workers))
    values = {k: np.array([r[k] for r in rows], dtype=float) for k in SCALARS}
    t_unc = next((r["T_unc"] for r in rows if not math.isnan(r["T_unc"])), math.nan)
    rc1 = rc_unity(params, kind)
    if rc1 is not None and not (u_lo <= rc1 <= u_hi):
        rc1 = None
    return CurveTable(kind, params, us, values, [r["regime"] for r in rows], cfg.dt, t_unc, rc1,
                      cfg, mesh_count)


@dataclass(frozen=True)
class Transition:
    index: int
    u_before: float
    u_after: float
    tau_before: float
    tau_after: float
    T_before: float
    T_after: float
    s_before: float
    s_after: float
    threshold: float

    @property
    def tau_jump(self) -> float:
        return self.tau_after - self.tau_before

    @property
    def T_jump(self) -> float:
        return self.T_after - self.T_before

    @property
    def s_jump(self) -> float:
        return self.s_after - self.s_before


def detect_transition(curve: CurveTable) -> Transition | None:
    """First adjacent pair where ``tau*`` drops by more than 10x the median change.

    The median is taken over the nonzero adjacent changes: on a curve that sits
    at ``tau* = 0`` for most of its range the plain median is zero and every
    small in-regime decrease would qualify.
    """
    tau = curve.values["tau_star"]
    d = np.diff(tau)
    moving = np.isfinite(d) & (d != 0)
    if not moving.any():
        return None
    threshold = 10.0 * float(np.median(np.abs(d[moving])))
    T = curve.values["T_star"]
    s = curve.values["s_at_Tstar"]
    for k in range(len(d)):
        if moving[k] and -d[k] > threshold:
            return Transition(k, float(curve.u_max[k]), float(curve.u_max[k + 1]),
                              float(tau[k]), float(tau[k + 1]), float(T[k]), float(T[k + 1]),
                              float(s[k]), float(s[k + 1]), threshold)
    return None


def refine_transition(curve: CurveTable, tr: Transition, iterations: int = 14) -> Transition:
    """Shrink the bracket of ``tr`` by bisection on ``u_max``.

    A midpoint joins the side whose ``tau*`` it is closer to. Every point uses
    the curve's step size and mesh, so the refined jumps are comparable with
    the coarse ones.
    """
    cfg = curve.cfg or default_config(curve.params, Policy(curve.policy, float(curve.u_max[-1])))
    lo = (tr.u_before, tr.tau_before, tr.T_before, tr.s_before)
    hi = (tr.u_after, tr.tau_after, tr.T_after, tr.s_after)
    for _ in range(iterations):
        u = 0.5 * (lo[0] + hi[0])
        res = optimize(curve.params, Policy(curve.policy, u), curve.mesh_count, cfg)
        mid = (u, res.tau_star, res.T_star, res.s_at_Tstar)
        if abs(res.tau_star - lo[1]) <= abs(res.tau_star - hi[1]):
            lo = mid
        else:
            hi = mid
    return Transition(tr.index, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2], lo[3], hi[3],
                      tr.threshold)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


MAP_COLUMNS = ["x_value", "y_value", "regime", *SCALARS, "plateau"]
CURVE_COLUMNS = ["u_max", *SCALARS, "regime"]


def write_map_csv(m: RegimeMap, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MAP_COLUMNS)
        for ix, x in enumerate(m.x):
            for iy, y in enumerate(m.y):
                w.writerow([_fmt(x), _fmt(y), m.regime[ix, iy],
                            *(_fmt(m.values[k][ix, iy]) for k in SCALARS),
                            int(m.plateau[ix, iy])])


def write_curve_csv(c: CurveTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for n, u in enumerate(c.u_max):
            w.writerow([_fmt(u), *(_fmt(c.values[k][n]) for k in SCALARS), c.regime[n]])


GRAYS = {
    RegimeClass.CONSTANT_MAX.value: "#ffffff",
    RegimeClass.DELAYED_BEFORE_PEAK.value: "#d3d3d3",
    RegimeClass.DELAYED_AT_PEAK.value: "#909090",
    RegimeClass.DELAYED_AFTER_PEAK.value: "#4d4d4d",
    FAILED: "#c0392b",
}


def write_map_svg(m: RegimeMap, path: str | Path, cell: int = 8) -> None:
    """Gray-scale heatmap: x to the right, R0 upward."""
    nx, ny = m.regime.shape
    pad_l, pad_b, pad_t = 60, 40, 10
    width, height = pad_l + nx * cell + 10, pad_t + ny * cell + pad_b
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>']
    for ix in range(nx):
        for iy in range(ny):
            x0 = pad_l + ix * cell
            y0 = pad_t + (ny - 1 - iy) * cell
            out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" '
                       f'fill="{GRAYS[m.regime[ix, iy]]}" stroke="none"/>')
    out.append(f'<rect x="{pad_l}" y="{pad_t}" width="{nx * cell}" height="{ny * cell}" '
               'fill="none" stroke="#000000"/>')
    yb = pad_t + ny * cell
    out.append(f'<text x="{pad_l}" y="{yb + 15}" font-size="10">{m.x[0]:.3g}</text>')
    out.append(f'<text x="{pad_l + nx * cell}" y="{yb + 15}" font-size="10" text-anchor="end">{m.x[-1]:.3g}</text>')
    out.append(f'<text x="{pad_l + nx * cell / 2}" y="{yb + 30}" font-size="11" text-anchor="middle">{m.spec.x_axis}</text>')
    out.append(f'<text x="{pad_l - 4}" y="{yb}" font-size="10" text-anchor="end">{m.y[0]:.3g}</text>')
    out.append(f'<text x="{pad_l - 4}" y="{pad_t + 10}" font-size="10" text-anchor="end">{m.y[-1]:.3g}</text>')
    out.append(f'<text x="12" y="{pad_t + ny * cell / 2}" font-size="11">R0</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
