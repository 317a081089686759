import numpy as np
import pytest

from sirtimeopt.integrate import default_config
from sirtimeopt.model import ModelParams, Policy, PolicyKind, rc
from sirtimeopt.sweep import (
    FAILED,
    GRAYS,
    CurveTable,
    SweepSpec,
    detect_transition,
    rc_unity,
    run_curves,
    run_map,
    worker_count,
    write_curve_csv,
    write_map_csv,
    write_map_svg,
)
from sirtimeopt.timeopt import RegimeClass

V, ISO, CULL, RED = PolicyKind.VACCINATION, PolicyKind.ISOLATION, PolicyKind.CULLING, PolicyKind.REDUCTION


@pytest.fixture(scope="module")
def small_map():
    spec = SweepSpec(ISO, x_lo=1.0, x_hi=8.0, n_x=4, r0_lo=1.5, r0_hi=4.0, n_y=3, mesh_count=60)
    return spec, run_map(spec)


def test_map_shape_and_rc(small_map):
    spec, m = small_map
    assert m.regime.shape == (4, 3)
    for ix, x in enumerate(m.x):
        for iy, y in enumerate(m.y):
            params, pol = spec.cell(float(x), float(y))
            assert params.beta == pytest.approx(y * spec.mu / spec.s0)
            assert m.values["RC"][ix, iy] == rc(params, pol)
            assert m.regime[ix, iy] in GRAYS


def test_map_csv_deterministic(tmp_path, small_map):
    spec, m = small_map
    write_map_csv(m, tmp_path / "a.csv")
    write_map_csv(run_map(spec, workers=2), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = (tmp_path / "a.csv").read_text().splitlines()[0].split(",")
    assert header[:9] == ["x_value", "y_value", "regime", "tau_star", "T_star", "T_at_zero",
                          "s_at_Tstar", "s_at_Tzero", "RC"]


def test_sub_grid_cells_match(small_map):
    spec, m = small_map
    # every other x and the last R0 value, as a separate 2x2 map
    from dataclasses import replace
    sub = replace(spec, x_lo=float(m.x[1]), x_hi=float(m.x[3]), n_x=2,
                  r0_lo=float(m.y[1]), r0_hi=float(m.y[2]), n_y=2)
    ms = run_map(sub)
    for a, ix in enumerate((1, 3)):
        for b, iy in enumerate((1, 2)):
            assert ms.regime[a, b] == m.regime[ix, iy]
            assert ms.values["tau_star"][a, b] == m.values["tau_star"][ix, iy]
            assert ms.values["T_star"][a, b] == m.values["T_star"][ix, iy]


def test_i0_axis_map():
    spec = SweepSpec(RED, x_axis="i0", x_lo=1.0, x_hi=20.0, n_x=2, r0_lo=2.0, r0_hi=3.0, n_y=2,
                     u_max=0.5, mesh_count=40)
    m = run_map(spec)
    params, pol = spec.cell(20.0, 3.0)
    assert params.i0 == 20.0 and pol.u_max == 0.5
    assert params.beta == pytest.approx(3.0 * 5.0 / 2000.0)
    assert FAILED not in set(m.regime.ravel())


def test_failed_cells_are_recorded():
    spec = SweepSpec(ISO, x_lo=1.0, x_hi=2.0, n_x=2, r0_lo=2.0, r0_hi=3.0, n_y=2,
                     mesh_count=10, dt=1e-3, t_horizon=0.01)
    m = run_map(spec)
    assert m.count(FAILED) == 4
    assert len(m.errors) == 4
    assert np.all(np.isnan(m.values["tau_star"]))
    assert np.all(np.isfinite(m.values["RC"]))


def test_svg_uses_grays(tmp_path, small_map):
    _, m = small_map
    write_map_svg(m, tmp_path / "m.svg")
    text = (tmp_path / "m.svg").read_text()
    assert text.startswith("<svg")
    assert text.count("<rect") == 4 * 3 + 2
    assert GRAYS[RegimeClass.CONSTANT_MAX.value] == "#ffffff"


def test_small_u_column_is_flat():
    spec = SweepSpec(ISO, x_lo=1e-4, x_hi=1.0, n_x=2, r0_lo=2.0, r0_hi=3.0, n_y=2, mesh_count=60)
    m = run_map(spec)
    assert m.plateau[0].all()


def test_rc_unity():
    p = ModelParams.from_r0(2.0)
    assert rc_unity(p, ISO) == pytest.approx(5.0)
    assert rc_unity(p, RED) == pytest.approx(0.5)
    assert rc_unity(p, V) is None
    assert rc(p, Policy(ISO, rc_unity(p, ISO))) == pytest.approx(1.0)


def test_curves_basic(tmp_path):
    p = ModelParams.from_r0(2.0)
    c = run_curves(ISO, p, 0.0, 8.0, 9, mesh_count=60)
    assert len(c) == 9
    assert c.values["T_at_zero"][0] == pytest.approx(c.T_unc)
    assert c.rc_one == pytest.approx(5.0)
    assert np.all(np.diff(c.values["RC"]) < 0)
    write_curve_csv(c, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "u_max,tau_star,T_star,T_at_zero,s_at_Tstar,s_at_Tzero,RC,regime"
    assert len(lines) == 10


def _curve(taus, Ts=None):
    n = len(taus)
    Ts = Ts if Ts is not None else [1.0] * n
    vals = {"tau_star": np.array(taus, float), "T_star": np.array(Ts, float),
            "s_at_Tstar": np.zeros(n), "T_at_zero": np.ones(n), "s_at_Tzero": np.zeros(n),
            "RC": np.ones(n)}
    return CurveTable(V, ModelParams.from_r0(3), np.linspace(0.1, 1, n), vals, ["x"] * n, 0.01, 3.0, None)


def test_detect_transition_synthetic():
    tr = detect_transition(_curve([1.0, 0.99, 0.98, 0.97, 0.0, 0.0], [2, 1.9, 1.8, 1.75, 1.74, 1.7]))
    assert tr.index == 3
    assert tr.tau_jump == pytest.approx(-0.97)
    assert tr.T_jump == pytest.approx(-0.01)
    assert detect_transition(_curve([0.0] * 6)) is None


def test_worker_count_env(monkeypatch):
    monkeypatch.delenv("SIRTIMEOPT_WORKERS", raising=False)
    assert worker_count() == 1
    assert worker_count(4) == 4
    monkeypatch.setenv("SIRTIMEOPT_WORKERS", "2")
    assert worker_count(8) == 2
    assert worker_count() == 2


def test_spec_validation():
    with pytest.raises(ValueError, match="x_axis"):
        SweepSpec(ISO, x_axis="beta")
    with pytest.raises(ValueError, match="n_x"):
        SweepSpec(ISO, n_x=1)
    with pytest.raises(ValueError, match="R0"):
        SweepSpec(ISO, r0_lo=3.0, r0_hi=2.0)
