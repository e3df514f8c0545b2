import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riemannian_minmax.cli import main
from riemannian_minmax.config import (
    ConfigError,
    config_from_dict,
    dump_config,
    load_config,
    parse_config,
    resolve_gamma,
)

FULL = """
[game]
variant = "example2"
a = [[1.0], [1.0], [1.0]]
b = [1.0, 1.0, 0.99]
kappa = 0.1

[solver]
mode = "sga"
tau = 10
gamma = "0.001/tau"
theta = 0.15
max_iters = 2000
record_every = 100

[spectral]
tau_grid = [30, 50]
theta = 0.15
"""


def write(tmp_path, text, name="c.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_round_trip_is_canonical():
    cfg = parse_config(FULL)
    again = parse_config(dump_config(cfg))
    assert again.as_dict() == cfg.as_dict()
    assert again.digest() == cfg.digest()
    assert cfg.solver["tau"] == 10.0 and isinstance(cfg.solver["max_iters"], int)


@given(st.floats(1e-3, 1e3), st.floats(1e-6, 1.0), st.integers(0, 10**6))
def test_round_trip_property(tau, c, iters):
    cfg = config_from_dict({"solver": {"tau": tau, "gamma": f"{c!r}/tau", "max_iters": iters}})
    again = parse_config(dump_config(cfg))
    assert again.as_dict() == cfg.as_dict()
    assert again.gamma() == pytest.approx(c / tau)


def test_gamma_expression_tracks_tau():
    cfg = parse_config(FULL)
    assert cfg.gamma() == pytest.approx(1e-4)
    assert cfg.with_overrides(tau=50.0).gamma() == pytest.approx(2e-5)
    assert cfg.with_overrides(gamma=0.5).gamma() == 0.5
    assert resolve_gamma("2/tau", 4.0) == 0.5
    with pytest.raises(ConfigError):
        resolve_gamma("tau/2", 4.0)


@pytest.mark.parametrize("text", [
    "[game]\nvariant = 'example9'\n",
    "[solver]\ntau = -1\n",
    "[solver]\nmode = 'adam'\n",
    "[solver]\ngamma = 'x/tau'\n",
    "[solver]\nmax_iters = 1.5\n",
    "[solver]\nseed = 18446744073709551616\n",
    "[solver]\nbogus = 1\n",
    "[solver]\ntau = 1e400\n",
    "[solver]\ntau = 1" + "0" * 400 + "\n",
    "[nonsense]\n",
    "[game]\na = [[1.0], [\"x\"]]\n",
    "[start]\nkind = 'explicit'\nx = [0.0]\n",
    "[wgan]\nemd_samples = 1000\n",
    "this is = = not toml",
])
def test_malformed_configs_raise(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bin.toml"
    bad.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_build_game_and_solver():
    cfg = parse_config(FULL)
    game = cfg.build_game()
    assert game.variant == "example2" and game.kappa == 0.1
    s = cfg.solver_config()
    assert s.mode == "sga" and s.gamma == pytest.approx(1e-4)


@pytest.mark.parametrize("variant, expected", [
    ("example1", "DSE_not_DNE"), ("example2", "DSE_not_DNE"), ("example3", "DNE"),
])
def test_verify_equilibrium(variant, expected, tmp_path, capsys):
    path = write(tmp_path, f"[game]\nvariant = '{variant}'\n")
    assert main(["verify-equilibrium", "--config", path, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify_equilibrium.json").read_text())
    assert report["class"] == expected
    assert json.loads(capsys.readouterr().out)["class"] == expected


def test_verify_random_point_is_not_critical(tmp_path, capsys):
    path = write(tmp_path, "[start]\nkind = 'random'\nseed = 3\n")
    assert main(["verify-equilibrium", "--config", path]) == 0
    assert json.loads(capsys.readouterr().out)["class"] == "NotCritical"


def test_spectral_report(tmp_path, capsys):
    assert main(["spectral-report", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "spectral_report.json").read_text())
    rows = {r["tau"]: r for r in report["rows"]}
    assert rows[30.0]["gda_hurwitz"] is False and rows[50.0]["gda_hurwitz"] is True
    assert rows[30.0]["sga_hurwitz"] is True
    assert report["gda_certificate"]["tau_threshold"] == pytest.approx(36.18, abs=0.4)
    assert report["sga_certificate"]["tau_threshold"] == pytest.approx(16.7, abs=0.3)


def test_spectral_report_theta_zero(tmp_path, capsys):
    path = write(tmp_path, "[spectral]\ntau_grid = [10, 40, 80]\ntheta = 0.0\n")
    assert main(["spectral-report", "--config", path]) == 0
    for row in json.loads(capsys.readouterr().out)["rows"]:
        assert row["gda_hurwitz"] == row["sga_hurwitz"]
        assert row["gda_max_real"] == row["sga_max_real"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_gda_tau50(tmp_path, capsys):
    args = ["run", "--out", str(tmp_path), "--tau", "50", "--gamma", "0.001/tau", "--iters", "1000000"]
    path = write(tmp_path, "[solver]\nrecord_every = 10000\n")
    assert main(args + ["--config", path]) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert rows[0] == ["t", "f", "grad_norm_x", "grad_norm_y", "dist"]
    assert abs(float(rows[-1][1]) + 0.141) <= 1e-3
    summary = json.loads((tmp_path / "trajectory.json").read_text())
    assert summary["diverged"] is False and summary["csv"] == "trajectory.csv"


def test_run_sga_tau10_converges(tmp_path, capsys):
    path = write(tmp_path, FULL.replace("max_iters = 2000", "max_iters = 2500000").replace(
        "record_every = 100", "record_every = 10000"))
    assert main(["run", "--config", path, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert float(rows[-1][4]) < 1e-6


def test_zero_iteration_run(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path), "--iters", "0"]) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert len(rows) == 2 and rows[1][0] == "0"


def test_sweep(tmp_path, capsys):
    path = write(tmp_path, FULL + "\n[sweep]\ntaus = [10, 50]\nmodes = ['gda', 'sga']\nworkers = 2\n")
    assert main(["sweep", "--config", path, "--out", str(tmp_path)]) == 0
    index = json.loads((tmp_path / "sweep_index.json").read_text())["runs"]
    assert len(index) == 4
    assert len({r["stem"] for r in index}) == 4
    for r in index:
        assert (tmp_path / f"{r['stem']}.csv").exists()
        assert r["gamma"] == pytest.approx(1e-3 / r["tau"])


def test_wgan_smoke(tmp_path, capsys):
    path = write(tmp_path, "[game]\nvariant = 'wgan'\n[solver]\ntau = 100\ngamma = 2e-4\nmax_iters = 100\n"
                           "[wgan]\neval_every = 50\nbatch_size = 64\nemd_samples = 64\n")
    assert main(["wgan", "--config", path, "--out", str(tmp_path), "--seed", "5"]) == 0
    rows = read_csv(tmp_path / "metrics.csv")
    assert rows[0] == ["t", "f_hat", "angle", "cov_err", "emd"]
    assert [r[0] for r in rows[1:]] == ["0", "50", "100"]
    assert all(np.isfinite(float(v)) for r in rows[1:] for v in r)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["max_constraint_residual"] < 1e-10
    ck = json.loads((tmp_path / "checkpoint.json").read_text())
    assert len(ck["point"]["w"]) == 5


@pytest.mark.parametrize("argv, code", [
    (["frobnicate"], 1),
    (["run"], 1),
    (["run", "--tau", "abc"], 1),
    (["run", "--out", "OUT", "--tau", "-3"], 1),
    (["run", "--out", "OUT", "--gamma", "x/tau"], 1),
    (["wgan", "--out", "OUT", "--config", "CFG"], 1),
    (["verify-equilibrium", "--config", "MISSING"], 1),
    (["run", "--out", "OUT", "--config", "DEGENERATE"], 2),
    (["spectral-report", "--config", "DEGENERATE"], 2),
])
def test_exit_codes(argv, code, tmp_path, capsys):
    subs = {
        "OUT": str(tmp_path / "out"),
        "CFG": write(tmp_path, "[game]\nvariant = 'example1'\n"),
        "MISSING": str(tmp_path / "nope.toml"),
        # b in the range of A: the residual vanishes and no equilibrium exists
        "DEGENERATE": write(tmp_path, "[game]\nvariant = 'example1'\nb = [1.0, 1.0, 1.0]\n", "d.toml"),
    }
    assert main([subs.get(a, a) for a in argv]) == code


@given(st.text(max_size=80))
def test_arbitrary_config_text_never_crashes(text):
    try:
        cfg = parse_config(text)
    except ConfigError:
        return
    assert parse_config(dump_config(cfg)).as_dict() == cfg.as_dict()


def test_output_dir_unwritable(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--out", str(blocker / "sub")]) == 2
