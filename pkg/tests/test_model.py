import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sirtimeopt.model import (
    ModelParams,
    Policy,
    PolicyKind,
    State,
    control_direction,
    jacobian,
    r0,
    rc,
    uncontrolled_field,
    vector_field,
)

V, ISO, CULL, RED = PolicyKind.VACCINATION, PolicyKind.ISOLATION, PolicyKind.CULLING, PolicyKind.REDUCTION


def test_alpha_coefficients_per_kind():
    assert (Policy(V, 1).alpha1, Policy(V, 1).alpha2) == (1, 0)
    assert (Policy(ISO, 1).alpha1, Policy(ISO, 1).alpha2) == (0, 1)
    assert (Policy(CULL, 1).alpha1, Policy(CULL, 1).alpha2) == (1, 1)
    assert not Policy(RED, 1).is_linear


def test_policy_aliases():
    assert PolicyKind.parse("TransmissionReduction") is RED
    assert PolicyKind.parse("Vaccination") is V
    with pytest.raises(ValueError):
        PolicyKind.parse("quarantine")


def test_vaccination_u0_is_uncontrolled_field(fig2_params):
    x = State(1500.0, 30.0)
    assert vector_field(fig2_params, Policy(V, 3), x, 0.0) == uncontrolled_field(fig2_params, x)
    b, mu = fig2_params.beta, fig2_params.mu
    assert uncontrolled_field(fig2_params, x) == pytest.approx((-b * 1500 * 30, b * 1500 * 30 - mu * 30))


def test_culling_hand_value(fig2_params):
    # dS = -15 - 4000, dI = 15 - 5 - 2
    ds, di = vector_field(fig2_params, Policy(CULL, 2.0), State(2000.0, 1.0), 2.0)
    assert ds == pytest.approx(-4015.0)
    assert di == pytest.approx(8.0)


def test_full_reduction_leaves_only_removal(fig2_params):
    ds, di = vector_field(fig2_params, Policy(RED, 1.0), State(700.0, 40.0), 1.0)
    assert ds == 0.0
    assert di == pytest.approx(-5.0 * 40.0)


def test_r0_values():
    assert r0(ModelParams(0.0075, 5, 2000, 1)) == pytest.approx(3.0)
    assert r0(ModelParams(0.005, 5, 2000, 1)) == pytest.approx(2.0)
    assert r0(ModelParams(1e-12, 5, 2000, 1)) == pytest.approx(0.0, abs=1e-8)


def test_rc_values():
    p = ModelParams(0.005, 5, 2000, 1)
    assert rc(p, Policy(ISO, 5.0)) == pytest.approx(1.0)
    assert rc(p, Policy(CULL, 5.0)) == pytest.approx(1.0)
    assert rc(p, Policy(V, 5.0)) == pytest.approx(2.0)
    assert rc(p, Policy(RED, 1.0)) == 0.0
    for kind in PolicyKind:
        assert rc(p, Policy(kind, 0.0)) == pytest.approx(r0(p))


@pytest.mark.parametrize("kwargs, field", [
    (dict(beta=0, mu=5, s0=2000, i0=1), "beta"),
    (dict(beta=0.1, mu=-1, s0=2000, i0=1), "mu"),
    (dict(beta=0.1, mu=5, s0=0, i0=1), "s0"),
    (dict(beta=0.1, mu=5, s0=2000, i0=1, epsilon=1.0), "eps"),
    (dict(beta=0.1, mu=5, s0=2000, i0=0.5, epsilon=0.5), "i0"),
])
def test_params_validation_names_field(kwargs, field):
    with pytest.raises(ValueError, match=field):
        ModelParams(**kwargs)


def test_policy_validation():
    with pytest.raises(ValueError, match="u_max"):
        Policy(RED, 1.5)
    with pytest.raises(ValueError, match="u_max"):
        Policy(ISO, -1.0)
    # the do-nothing baseline is admissible for every kind
    assert Policy(ISO, 0.0).u_max == 0.0
    assert Policy(RED, 0.0).u_max == 0.0


def test_vector_field_rejects_bad_inputs(fig2_params):
    pol = Policy(ISO, 2.0)
    with pytest.raises(ValueError):
        vector_field(fig2_params, pol, State(10.0, 1.0), 2.5)
    with pytest.raises(ValueError):
        vector_field(fig2_params, pol, State(10.0, 1.0), -0.1)
    with pytest.raises(ValueError):
        vector_field(fig2_params, pol, State(-1.0, 1.0), 1.0)


states = st.tuples(st.floats(0, 5000), st.floats(0, 5000)).map(lambda t: State(*t))
params_st = st.builds(
    lambda r, mu: ModelParams.from_r0(r, mu=mu),
    st.floats(0.1, 8.0), st.floats(0.5, 20.0),
)
kinds = st.sampled_from(list(PolicyKind))


def _policy(kind, frac, top=10.0):
    return Policy(kind, frac if kind is RED else frac * top)



@settings(max_examples=300, deadline=None)
@given(params_st, kinds, st.floats(0.01, 1.0), st.floats(0, 1), states)
def test_field_invariants(p, kind, frac, ufrac, x):
    pol = _policy(kind, frac)
    u = ufrac * pol.u_max
    ds, di = vector_field(p, pol, x, u)
    scale = 1e-9 * (1 + abs(p.beta * x.s * x.i) + p.mu * x.i + 10 * (x.s + x.i))
    assert ds <= scale
    assert ds + di <= -p.mu * x.i + scale
    # affine in u with direction g
    f0 = vector_field(p, pol, x, 0.0)
    g = control_direction(p, pol, x)
    assert ds == pytest.approx(f0[0] + u * g[0], rel=1e-12, abs=scale)
    assert di == pytest.approx(f0[1] + u * g[1], rel=1e-12, abs=scale)
    if kind is V:
        assert di == f0[1]


@settings(max_examples=200, deadline=None)
@given(params_st, kinds, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_rc_nonincreasing(p, kind, a, b):
    lo, hi = sorted((a, b))
    assert rc(p, _policy(kind, hi)) <= rc(p, _policy(kind, lo)) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(params_st, kinds, st.floats(0.01, 1.0), st.floats(0, 1), states)
def test_jacobian_matches_finite_difference(p, kind, frac, ufrac, x):
    pol = _policy(kind, frac)
    u = ufrac * pol.u_max
    x = State(x.s + 1.0, x.i + 1.0)
    J = jacobian(p, pol, x, u)
    h = 1e-4
    for col, dx in enumerate(((h, 0.0), (0.0, h))):
        fp = vector_field(p, pol, State(x.s + dx[0], x.i + dx[1]), u)
        fm = vector_field(p, pol, State(x.s - dx[0], x.i - dx[1]), u)
        for row in range(2):
            fd = (fp[row] - fm[row]) / (2 * h)
            assert math.isclose(J[row][col], fd, rel_tol=1e-6, abs_tol=1e-6 * (1 + abs(fd)))
