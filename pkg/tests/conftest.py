import numpy as np
import pytest

from sirtimeopt.model import ModelParams, Policy, PolicyKind


def rk4(fun, y0, t1, n):
    """Classical RK4 with ``n`` steps on ``[0, t1]``; independent reference integrator."""
    y = np.asarray(y0, dtype=float)
    h = t1 / n
    for _ in range(n):
        k1 = fun(y)
        k2 = fun(y + 0.5 * h * k1)
        k3 = fun(y + 0.5 * h * k2)
        k4 = fun(y + h * k3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def sir_rhs(beta, mu, c1=0.0, c2=0.0, reduction=0.0):
    """Controlled SIR field written out by hand, not via the package."""
    def f(y):
        s, i = y
        inf = beta * (1.0 - reduction) * s * i
        return np.array([-inf - c1 * s, inf - (mu + c2) * i])
    return f


@pytest.fixture
def fig2_params():
    # beta = 0.0075 gives R0 = 3 with S0 = 2000, mu = 5
    return ModelParams(beta=0.0075, mu=5.0, s0=2000.0, i0=1.0, epsilon=0.5)


@pytest.fixture(params=list(PolicyKind))
def any_policy(request):
    kind = request.param
    return Policy(kind, 0.5 if kind is PolicyKind.REDUCTION else 3.0)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
