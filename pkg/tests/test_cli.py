import csv

import pytest
import yaml

from sirtimeopt.cli import main
from sirtimeopt.config import ConfigError, parse_config
from sirtimeopt.model import PolicyKind


def test_defaults():
    cfg = parse_config(subcommand="optimize")
    assert cfg.params.epsilon == 0.5
    assert (cfg.params.s0, cfg.params.mu, cfg.params.i0) == (2000.0, 5.0, 1.0)
    assert cfg.params.beta == pytest.approx(0.0075)


def test_precedence_flags_over_file():
    text = "policy: isolation\nu_max: 2.0\nmu: 4.0\nintegrator:\n  dt: 0.001\n"
    cfg = parse_config(text, {"u_max": 3.0, "integrator": {"newton_tol": 1e-9}}, "optimize")
    assert cfg.policy is PolicyKind.ISOLATION
    assert cfg.u_max == 3.0
    assert cfg.params.mu == 4.0
    assert cfg.integrator["dt"] == 0.001 and cfg.integrator["newton_tol"] == 1e-9


def test_beta_in_flags_overrides_r0_in_file():
    cfg = parse_config("R0: 4.0\n", {"beta": 0.001}, "optimize")
    assert cfg.params.beta == 0.001


@pytest.mark.parametrize("text, field", [
    ("i0: 0.4\n", "i0"),
    ("i0: 0.5\n", "i0"),
    ("policy: reduction\nu_max: 1.5\n", "u_max"),
    ("eps: 1.2\n", "eps"),
    ("colour: red\n", "colour"),
    ("integrator:\n  dtt: 1\n", "integrator.dtt"),
    ("integrator:\n  dt: -1\n", "integrator.dt"),
    ("mu: fast\n", "mu"),
    ("beta: 0.1\nR0: 2\n", "beta"),
    ("map:\n  x_axis: beta\n", "map.x_axis"),
    ("policy: quarantine\n", "quarantine"),
    ("[1, 2]\n", "config"),
])
def test_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text, None, "optimize")


def test_unknown_subcommand():
    with pytest.raises(ConfigError, match="subcommand"):
        parse_config("", None, "launch")


def test_round_trip():
    cfg = parse_config("policy: culling\nu_max: 1.25\nR0: 2.7\ni0: 3.0\ntau: 0.4\n"
                       "map:\n  n_x: 7\noutput:\n  svg: true\n", {"workers": 3}, "map")
    again = parse_config(cfg.dump())
    assert again == cfg
    assert yaml.safe_load(cfg.dump())["beta"] == cfg.params.beta


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_optimize_end_to_end(tmp_path, capsys):
    prefix = tmp_path / "fig2"
    code, out, _ = _run(["optimize", "--policy", "vaccination", "--umax", "3", "--r0", "3",
                         "--mesh", "100", "--out", str(prefix)], capsys)
    assert code == 0
    assert "regime=" in out and "T*=" in out and "T_tau0=" in out and "tau*=" in out
    with open(tmp_path / "fig2_optimal.csv") as fh:
        row = next(csv.DictReader(fh))
    assert row["policy"] == "vaccination" and float(row["R0"]) == pytest.approx(3.0)
    assert (tmp_path / "fig2_trajectory.csv").exists()


def test_outputs_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["optimize", "--policy", "isolation", "--umax", "2", "--mesh", "60",
                     "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a_optimal.csv").read_bytes() == (tmp_path / "b_optimal.csv").read_bytes()
    assert (tmp_path / "a_trajectory.csv").read_bytes() == (tmp_path / "b_trajectory.csv").read_bytes()


def test_verify_pmp_emits_report(tmp_path, capsys):
    code, out, _ = _run(["verify-pmp", "--policy", "isolation", "--umax", "3", "--adjoint",
                         "--out", str(tmp_path / "v")], capsys)
    assert code == 0 and "pmp=PASS" in out
    with open(tmp_path / "v_pmp.csv") as fh:
        row = next(csv.DictReader(fh))
    assert row["passed"] == "True" and int(row["crossings"]) == 1
    assert (tmp_path / "v_adjoint.csv").exists()


def test_simulate_map_curves(tmp_path, capsys):
    assert main(["simulate", "--policy", "culling", "--umax", "2", "--tau", "0.2",
                 "--out", str(tmp_path / "s")]) == 0
    assert main(["map", "--policy", "isolation", "--nx", "3", "--ny", "2", "--mesh", "40", "--svg",
                 "--out", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m_map.svg").exists()
    assert main(["curves", "--policy", "reduction", "--r0", "2", "--n", "4", "--mesh", "40",
                 "--out", str(tmp_path / "c")]) == 0
    assert len((tmp_path / "c_curves.csv").read_text().splitlines()) == 5


def test_config_file_and_flags(tmp_path, capsys):
    conf = tmp_path / "run.yaml"
    conf.write_text("policy: isolation\nu_max: 3.0\nmesh_count: 60\n")
    code, out, _ = _run(["optimize", "--config", str(conf), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    with open(tmp_path / "o_optimal.csv") as fh:
        row = next(csv.DictReader(fh))
    assert row["policy"] == "isolation" and float(row["u_max"]) == 3.0


def test_exit_codes(tmp_path, capsys):
    assert _run([], capsys)[0] != 0
    code, _, err = _run(["optimize", "--policy", "reduction", "--umax", "1.5"], capsys)
    assert code == 2 and "u_max" in err
    code, _, err = _run(["optimize", "--i0", "0.3", "--umax", "1"], capsys)
    assert code == 2 and "i0" in err
    code, _, err = _run(["optimize"], capsys)
    assert code == 2 and "u_max" in err
    code, _, _ = _run(["optimize", "--umax", "1", "--config", str(tmp_path / "missing.yaml")], capsys)
    assert code == 4
    code, _, err = _run(["optimize", "--umax", "1", "--dt", "0.4", "--newton-max-iter", "1",
                         "--out", str(tmp_path / "x")], capsys)
    assert code == 3 and "integration" in err
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = _run(["simulate", "--umax", "1", "--out", str(blocker / "sub" / "run")], capsys)
    assert code == 4
    with pytest.raises(SystemExit) as info:
        main(["launch"])
    assert info.value.code != 0


def test_empty_subcommand_prints_usage(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err
