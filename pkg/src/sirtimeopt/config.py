"""Run configuration: YAML file + command-line flags + defaults.

Precedence is flags > file > defaults. Keys shared with the CSV outputs use the
same names (``policy``, ``beta``, ``R0``, ``mu``, ``s0``, ``i0``, ``eps``, ``u_max``).
``beta`` and ``R0`` are alternatives; whichever the highest layer sets wins.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

import yaml

from .integrate import IntegratorConfig
from .model import ModelParams, Policy, PolicyKind
from .sweep import SweepSpec

SUBCOMMANDS = ("simulate", "optimize", "verify-pmp", "map", "curves")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


DEFAULTS: dict[str, Any] = {
    "policy": "vaccination",
    "u_max": None,
    "R0": 3.0,
    "beta": None,
    "mu": 5.0,
    "s0": 2000.0,
    "i0": 1.0,
    "eps": 0.5,
    "tau": 0.0,
    "mesh_count": 400,
    "integrator": {"dt": None, "t_horizon": None, "newton_tol": 1e-10, "newton_max_iter": 25},
    "map": {"x_axis": "u_max", "x_lo": None, "x_hi": None, "n_x": 60,
            "r0_lo": 1.05, "r0_hi": 5.0, "n_y": 60},
    "curves": {"u_lo": 0.0, "u_hi": None, "n": 200},
    "output": {"prefix": "out/run", "svg": False, "adjoint": False},
    "workers": None,
}

_TOP_KEYS = set(DEFAULTS) | {"subcommand"}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    params: ModelParams
    policy: PolicyKind
    u_max: float | None
    tau: float
    mesh_count: int
    integrator: dict = field(default_factory=dict)
    map: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    workers: int | None = None

    def policy_obj(self) -> Policy:
        if self.u_max is None:
            raise ConfigError("u_max: required for this subcommand")
        return Policy(self.policy, self.u_max)

    def integrator_config(self, default: IntegratorConfig) -> IntegratorConfig:
        over = {k: v for k, v in self.integrator.items() if v is not None}
        try:
            return IntegratorConfig(**{**default.__dict__, **over})
        except ValueError as exc:
            raise ConfigError(f"integrator.{exc}") from None

    def sweep_spec(self) -> SweepSpec:
        m = self.map
        p = self.params
        x_axis = m["x_axis"]
        if x_axis == "u_max":
            x_lo = m["x_lo"] if m["x_lo"] is not None else 0.0
            default_hi = 1.0 if self.policy is PolicyKind.REDUCTION else 2.0 * p.mu
            x_hi = m["x_hi"] if m["x_hi"] is not None else default_hi
            if x_lo == 0.0:
                x_lo = x_hi / m["n_x"]
        else:
            x_lo = m["x_lo"] if m["x_lo"] is not None else 1.0
            x_hi = m["x_hi"] if m["x_hi"] is not None else 50.0
        try:
            return SweepSpec(
                policy=self.policy, x_axis=x_axis, x_lo=x_lo, x_hi=x_hi, n_x=m["n_x"],
                r0_lo=m["r0_lo"], r0_hi=m["r0_hi"], n_y=m["n_y"], s0=p.s0, i0=p.i0, mu=p.mu,
                eps=p.epsilon, u_max=self.u_max if self.u_max is not None else 1.0,
                mesh_count=self.mesh_count, dt=self.integrator.get("dt"),
                t_horizon=self.integrator.get("t_horizon"),
            )
        except ValueError as exc:
            raise ConfigError(f"map.{exc}") from None

    def to_dict(self) -> dict:
        """Plain mapping that :func:`config_from_mapping` turns back into ``self``."""
        return {
            "subcommand": self.subcommand,
            "policy": self.policy.value,
            "u_max": self.u_max,
            "beta": self.params.beta,
            "mu": self.params.mu,
            "s0": self.params.s0,
            "i0": self.params.i0,
            "eps": self.params.epsilon,
            "tau": self.tau,
            "mesh_count": self.mesh_count,
            "integrator": dict(self.integrator),
            "map": dict(self.map),
            "curves": dict(self.curves),
            "output": dict(self.output),
            "workers": self.workers,
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _merge(base: dict, layer: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in layer.items():
        if key not in out and not (where == "" and key in _TOP_KEYS):
            raise ConfigError(f"{where}{key}: unknown key")
        if isinstance(out.get(key), dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}{key}: expected a mapping")
            out[key] = _merge(out[key], value, f"{where}{key}.")
        else:
            out[key] = value
    if where == "":
        if layer.get("beta") is not None and layer.get("R0") is not None:
            raise ConfigError("beta: give either beta or R0, not both")
        if layer.get("beta") is not None:
            out["R0"] = None
        elif layer.get("R0") is not None:
            out["beta"] = None
    return out


def _number(d: dict, key: str, kind=float, where: str = ""):
    v = d[key]
    if v is None:
        return None
    if isinstance(v, bool):
        raise ConfigError(f"{where}{key}: expected a number, got {v!r}")
    try:
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}{key}: expected a number, got {v!r}") from None


def config_from_mapping(merged: dict) -> RunConfig:
    sub = merged.get("subcommand")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"subcommand: expected one of {', '.join(SUBCOMMANDS)}, got {sub!r}")
    try:
        kind = PolicyKind.parse(merged["policy"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    mu = _number(merged, "mu")
    s0 = _number(merged, "s0")
    beta = _number(merged, "beta")
    r0_value = _number(merged, "R0")
    if beta is None:
        if r0_value is None:
            raise ConfigError("beta: give beta or R0")
        beta = r0_value * mu / s0
    try:
        params = ModelParams(beta=beta, mu=mu, s0=s0, i0=_number(merged, "i0"),
                             epsilon=_number(merged, "eps"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    u_max = _number(merged, "u_max")
    if u_max is not None:
        try:
            Policy(kind, u_max)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    tau = _number(merged, "tau")
    if tau < 0:
        raise ConfigError(f"tau: must be >= 0, got {tau}")
    mesh = _number(merged, "mesh_count", int)
    if mesh < 2:
        raise ConfigError(f"mesh_count: must be >= 2, got {mesh}")

    integ = dict(merged["integrator"])
    for k, t in (("dt", float), ("t_horizon", float), ("newton_tol", float), ("newton_max_iter", int)):
        integ[k] = _number(integ, k, t, "integrator.")
        if integ[k] is not None and integ[k] <= 0:
            raise ConfigError(f"integrator.{k}: must be > 0, got {integ[k]}")
    mp = dict(merged["map"])
    if mp["x_axis"] not in ("u_max", "i0"):
        raise ConfigError(f"map.x_axis: must be 'u_max' or 'i0', got {mp['x_axis']!r}")
    for k, t in (("x_lo", float), ("x_hi", float), ("n_x", int), ("r0_lo", float),
                 ("r0_hi", float), ("n_y", int)):
        mp[k] = _number(mp, k, t, "map.")
    cv = dict(merged["curves"])
    for k, t in (("u_lo", float), ("u_hi", float), ("n", int)):
        cv[k] = _number(cv, k, t, "curves.")
    if cv["n"] is not None and cv["n"] < 2:
        raise ConfigError(f"curves.n: must be >= 2, got {cv['n']}")
    out = dict(merged["output"])
    if not isinstance(out["prefix"], str) or not out["prefix"]:
        raise ConfigError("output.prefix: expected a non-empty path")
    out["svg"] = bool(out["svg"])
    out["adjoint"] = bool(out["adjoint"])
    workers = _number(merged, "workers", int)
    return RunConfig(sub, params, kind, u_max, tau, mesh, integ, mp, cv, out, workers)


def parse_config(file_text: str | None = None, flags: dict | None = None,
                 subcommand: str | None = None) -> RunConfig:
    """Merge defaults, a YAML document and flag values into a validated :class:`RunConfig`."""
    merged = copy.deepcopy(DEFAULTS)
    if file_text:
        try:
            doc = yaml.safe_load(file_text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: not valid YAML ({exc})") from None
        if doc is not None:
            if not isinstance(doc, dict):
                raise ConfigError("config: top level must be a mapping")
            merged = _merge(merged, doc, "")
            merged["subcommand"] = doc.get("subcommand")
    if flags:
        merged = _merge(merged, flags, "")
    if subcommand is not None:
        merged["subcommand"] = subcommand
    return config_from_mapping(merged)
