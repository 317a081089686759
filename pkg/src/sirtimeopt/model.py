"""SIR dynamics with a single control policy.

The controlled field is ``F(x; u) = f(x) + u g(x)`` where ``f`` is the plain
SIR field and ``g`` depends on the policy:

=====================  =======================
policy                 g(S, I)
=====================  =======================
vaccination            (-S, 0)
isolation              (0, -I)
culling                (-S, -I)
reduction              (beta S I, -beta S I)
=====================  =======================

Every policy can be written as ``dS = -b S I - c1 S``, ``dI = b S I - (mu + c2) I``
with ``(b, c1, c2)`` depending on ``u``; :func:`field_coefficients` returns that
triple and the integration kernels work on it directly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple


class PolicyKind(str, enum.Enum):
    VACCINATION = "vaccination"
    ISOLATION = "isolation"
    CULLING = "culling"
    REDUCTION = "reduction"

    @classmethod
    def parse(cls, value: "str | PolicyKind") -> "PolicyKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "transmission-reduction": cls.REDUCTION,
            "transmissionreduction": cls.REDUCTION,
            "reduction-of-transmission": cls.REDUCTION,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"policy: unknown kind {value!r} (expected one of {names})") from None


# (alpha1, alpha2) of the linear policies
_ALPHAS = {
    PolicyKind.VACCINATION: (1.0, 0.0),
    PolicyKind.ISOLATION: (0.0, 1.0),
    PolicyKind.CULLING: (1.0, 1.0),
    PolicyKind.REDUCTION: (0.0, 0.0),
}


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological constants, initial state and eradication threshold."""

    beta: float
    mu: float
    s0: float
    i0: float
    epsilon: float = 0.5

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta: must be > 0, got {self.beta}")
        if not self.mu > 0:
            raise ValueError(f"mu: must be > 0, got {self.mu}")
        if not self.s0 > 0:
            raise ValueError(f"s0: must be > 0, got {self.s0}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"eps: must satisfy 0 < eps < 1, got {self.epsilon}")
        if not self.i0 > self.epsilon:
            raise ValueError(f"i0: must be > eps ({self.epsilon}), got {self.i0}")

    @classmethod
    def from_r0(cls, r0: float, mu: float = 5.0, s0: float = 2000.0, i0: float = 1.0,
                epsilon: float = 0.5) -> "ModelParams":
        """Build params with ``beta = r0 * mu / s0``."""
        return cls(beta=r0 * mu / s0, mu=mu, s0=s0, i0=i0, epsilon=epsilon)


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    u_max: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PolicyKind.parse(self.kind))
        if not self.u_max >= 0:
            raise ValueError(f"u_max: must be >= 0, got {self.u_max}")
        if self.kind is PolicyKind.REDUCTION and self.u_max > 1:
            raise ValueError(f"u_max: reduction policy requires 0 < u_max <= 1, got {self.u_max}")

    @property
    def alpha1(self) -> float:
        return _ALPHAS[self.kind][0]

    @property
    def alpha2(self) -> float:
        return _ALPHAS[self.kind][1]

    @property
    def is_linear(self) -> bool:
        return self.kind is not PolicyKind.REDUCTION

    def with_u_max(self, u_max: float) -> "Policy":
        return Policy(self.kind, u_max)


class State(NamedTuple):
    s: float
    i: float


def _check_state(state: State) -> None:
    if state.s < 0 or state.i < 0:
        raise ValueError(f"state: components must be >= 0, got S={state.s}, I={state.i}")


def _check_control(policy: Policy, u: float) -> None:
    if not 0 <= u <= policy.u_max:
        raise ValueError(f"u: control must lie in [0, {policy.u_max}], got {u}")


def field_coefficients(params: ModelParams, policy: Policy, u: float) -> tuple[float, float, float]:
    """Return ``(b, c1, c2)`` so that the field is ``(-bSI - c1 S, bSI - (mu+c2) I)``."""
    if policy.kind is PolicyKind.REDUCTION:
        return params.beta * (1.0 - u), 0.0, 0.0
    return params.beta, policy.alpha1 * u, policy.alpha2 * u


def vector_field(params: ModelParams, policy: Policy, state: State, u: float) -> tuple[float, float]:
    """Evaluate ``(dS/dt, dI/dt)`` for the controlled system."""
    _check_state(state)
    _check_control(policy, u)
    s, i = state
    b, c1, c2 = field_coefficients(params, policy, u)
    inf = b * s * i
    return -inf - c1 * s, inf - (params.mu + c2) * i


def jacobian(params: ModelParams, policy: Policy, state: State, u: float) -> tuple[tuple[float, float], tuple[float, float]]:
    s, i = state
    b, c1, c2 = field_coefficients(params, policy, u)
    return ((-b * i - c1, -b * s), (b * i, b * s - params.mu - c2))


def uncontrolled_field(params: ModelParams, state: State) -> tuple[float, float]:
    s, i = state
    inf = params.beta * s * i
    return -inf, inf - params.mu * i


def control_direction(params: ModelParams, policy: Policy, state: State) -> tuple[float, float]:
    """The vector ``g(x)`` multiplying the control."""
    s, i = state
    if policy.kind is PolicyKind.REDUCTION:
        inf = params.beta * s * i
        return inf, -inf
    return -policy.alpha1 * s, -policy.alpha2 * i


def r0(params: ModelParams) -> float:
    """Basic reproduction number ``beta S0 / mu``."""
    return params.beta * params.s0 / params.mu


def rc(params: ModelParams, policy: Policy) -> float:
    """Control reproduction number with the control at ``u_max`` from t=0."""
    base = params.beta * params.s0
    if policy.kind is PolicyKind.VACCINATION:
        return base / params.mu
    if policy.kind is PolicyKind.REDUCTION:
        return base * (1.0 - policy.u_max) / params.mu
    return base / (params.mu + policy.u_max)
