"""Command-line entry point: ``sirtimeopt <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import SUBCOMMANDS, ConfigError, RunConfig, parse_config
from .integrate import (
    ControlSchedule,
    IntegrationError,
    default_config,
    simulate,
    write_trajectory_csv,
)
from .model import Policy, r0, rc
from .pmp import adjoint_backward, check_pmp, write_adjoint_csv, write_report_csv
from .sweep import (
    detect_transition,
    refine_transition,
    run_curves,
    run_map,
    write_curve_csv,
    write_map_csv,
    write_map_svg,
)
from .timeopt import RESULT_COLUMNS, OptimizationError, optimize, result_row

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INTEGRATION = 3
EXIT_IO = 4


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model")
    g.add_argument("--config", help="YAML configuration file")
    g.add_argument("--policy", help="vaccination | isolation | culling | reduction")
    g.add_argument("--umax", "--u-max", dest="u_max", type=float)
    g.add_argument("--r0", dest="R0", type=float, help="basic reproduction number (sets beta)")
    g.add_argument("--beta", type=float)
    g.add_argument("--mu", type=float)
    g.add_argument("--s0", type=float)
    g.add_argument("--i0", type=float)
    g.add_argument("--eps", type=float)
    g.add_argument("--mesh", dest="mesh_count", type=int)
    g.add_argument("--workers", type=int)
    g = p.add_argument_group("integrator")
    g.add_argument("--dt", type=float)
    g.add_argument("--horizon", dest="t_horizon", type=float)
    g.add_argument("--newton-tol", type=float)
    g.add_argument("--newton-max-iter", type=int)
    g = p.add_argument_group("output")
    g.add_argument("--out", dest="prefix", help="output path prefix (default out/run)")
    g.add_argument("--svg", action="store_true", default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sirtimeopt",
        description="Time-optimal bang-bang control of SIR epidemics.",
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    common = _common()
    s = sub.add_parser("simulate", parents=[common], help="integrate one schedule")
    s.add_argument("--tau", type=float)
    sub.add_parser("optimize", parents=[common], help="optimal starting time tau*")
    v = sub.add_parser("verify-pmp", parents=[common], help="check minimum-principle conditions")
    v.add_argument("--adjoint", action="store_true", default=None, help="also dump costates")
    m = sub.add_parser("map", parents=[common], help="regime map over (x, R0)")
    m.add_argument("--x-axis", choices=["u_max", "i0"])
    m.add_argument("--x-lo", type=float)
    m.add_argument("--x-hi", type=float)
    m.add_argument("--nx", dest="n_x", type=int)
    m.add_argument("--r0-lo", type=float)
    m.add_argument("--r0-hi", type=float)
    m.add_argument("--ny", dest="n_y", type=int)
    c = sub.add_parser("curves", parents=[common], help="optimal quantities versus u_max")
    c.add_argument("--u-lo", type=float)
    c.add_argument("--u-hi", type=float)
    c.add_argument("--n", type=int)
    return parser


_NESTED = {
    "integrator": ("dt", "t_horizon", "newton_tol", "newton_max_iter"),
    "map": ("x_axis", "x_lo", "x_hi", "n_x", "r0_lo", "r0_hi", "n_y"),
    "curves": ("u_lo", "u_hi", "n"),
    "output": ("prefix", "svg", "adjoint"),
}


def flags_from_args(ns: argparse.Namespace) -> dict:
    """Explicitly given flags as a config layer (unset flags are ``None``)."""
    raw = {k: v for k, v in vars(ns).items() if v is not None and k not in ("config", "subcommand")}
    out: dict = {}
    for section, keys in _NESTED.items():
        part = {k: raw.pop(k) for k in keys if k in raw}
        if part:
            out[section] = part
    out.update(raw)
    return out


def _prefix(cfg: RunConfig) -> Path:
    p = Path(cfg.output["prefix"])
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _with_suffix(prefix: Path, tag: str) -> Path:
    return prefix.parent / f"{prefix.name}_{tag}"


def _cmd_simulate(cfg: RunConfig) -> str:
    policy = cfg.policy_obj()
    icfg = cfg.integrator_config(default_config(cfg.params, policy))
    traj = simulate(cfg.params, policy, ControlSchedule(cfg.tau, policy.u_max), icfg)
    path = _with_suffix(_prefix(cfg), "trajectory.csv")
    write_trajectory_csv(traj, path)
    T = "none" if traj.eradication_time is None else f"{traj.eradication_time:.6g}"
    return f"status={traj.status} T={T} tau={traj.tau:.6g} steps={len(traj) - 1} -> {path}"


def _write_result(cfg: RunConfig, res, path: Path) -> None:
    row = result_row(cfg.params, cfg.policy_obj(), res)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        w.writeheader()
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})


def _cmd_optimize(cfg: RunConfig) -> str:
    policy = cfg.policy_obj()
    icfg = cfg.integrator_config(default_config(cfg.params, policy))
    res = optimize(cfg.params, policy, cfg.mesh_count, icfg)
    prefix = _prefix(cfg)
    _write_result(cfg, res, _with_suffix(prefix, "optimal.csv"))
    write_trajectory_csv(res.trajectory, _with_suffix(prefix, "trajectory.csv"))
    return (f"regime={res.regime.value} tau*={res.tau_star:.6g} T*={res.T_star:.6g} "
            f"T_tau0={res.T_at_zero:.6g} T_unc={res.T_unc:.6g} R0={r0(cfg.params):.4g} "
            f"RC={rc(cfg.params, policy):.4g}")


def _cmd_verify(cfg: RunConfig) -> str:
    policy = cfg.policy_obj()
    icfg = cfg.integrator_config(default_config(cfg.params, policy))
    res = optimize(cfg.params, policy, cfg.mesh_count, icfg)
    report = check_pmp(cfg.params, policy, res, icfg)
    prefix = _prefix(cfg)
    write_report_csv(report, _with_suffix(prefix, "pmp.csv"))
    if cfg.output["adjoint"]:
        write_adjoint_csv(adjoint_backward(cfg.params, policy, res.trajectory, icfg),
                          _with_suffix(prefix, "adjoint.csv"))
    verdict = "PASS" if report.passed else "FAIL(" + ",".join(report.failures()) + ")"
    return (f"pmp={verdict} regime={res.regime.value} tau*={res.tau_star:.6g} "
            f"max|H|={report.ham_max:.3g} (tol {report.ham_tol:.3g}) crossings={report.crossings}")


def _cmd_map(cfg: RunConfig) -> str:
    spec = cfg.sweep_spec()
    m = run_map(spec, workers=cfg.workers)
    prefix = _prefix(cfg)
    path = _with_suffix(prefix, "map.csv")
    write_map_csv(m, path)
    if cfg.output["svg"]:
        write_map_svg(m, _with_suffix(prefix, "map.svg"))
    counts = {name: int((m.regime == name).sum()) for name in sorted(set(m.regime.ravel()))}
    return f"cells={m.regime.size} " + " ".join(f"{k}={v}" for k, v in counts.items()) + f" -> {path}"


def _cmd_curves(cfg: RunConfig) -> str:
    cv = cfg.curves
    u_hi = cv["u_hi"]
    if u_hi is None:
        u_hi = 1.0 if cfg.policy.value == "reduction" else 2.0 * cfg.params.mu
    icfg = None
    if any(v is not None for v in cfg.integrator.values()):
        icfg = cfg.integrator_config(default_config(cfg.params, Policy(cfg.policy, u_hi)))
    try:
        curve = run_curves(cfg.policy, cfg.params, cv["u_lo"], u_hi, cv["n"], icfg,
                           cfg.mesh_count, cfg.workers)
    except ValueError as exc:
        raise ConfigError(f"curves.{exc}") from None
    path = _with_suffix(_prefix(cfg), "curves.csv")
    write_curve_csv(curve, path)
    tr = detect_transition(curve)
    if tr is None:
        trans = "transition=none"
    else:
        tr = refine_transition(curve, tr)
        trans = (f"transition u_max~{tr.u_before:.6g} dtau*={tr.tau_jump:.4g} "
                 f"dT*={tr.T_jump:.4g} dS(T*)={tr.s_jump:.4g}")
    rc1 = "" if curve.rc_one is None else f" RC=1 at u_max={curve.rc_one:.4g}"
    return f"points={len(curve)} {trans}{rc1} -> {path}"


COMMANDS = {
    "simulate": _cmd_simulate,
    "optimize": _cmd_optimize,
    "verify-pmp": _cmd_verify,
    "map": _cmd_map,
    "curves": _cmd_curves,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg.subcommand``; print a one-line summary and return an exit status."""
    try:
        summary = COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, OptimizationError) as exc:
        print(f"integration error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(summary)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        text = Path(ns.config).read_text() if ns.config else None
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text, flags_from_args(ns), ns.subcommand)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
