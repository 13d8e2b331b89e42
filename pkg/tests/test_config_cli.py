import math

import numpy as np
import pytest

from maxstop import (ConfigError, dump_config, load_config, loads_config)
from maxstop.cli import main
from maxstop.config import ProblemConfig, validate

BASE = """
[model]
kind = gbm
mu = 0.05
sigma = 0.25
q = 0.15

[reward]
name = power_sum
a = 0.5
b = 1
k = 0.5
K = 5

[grids]
s_min = 10
s_max = 40
n_s = 4
n_x = 30

[mc]
n_paths = 4000
dt = 0.001
t_max = 10
seed = 20260823
points = 25:25

[output]
dir = out
"""

PUT = """
[model]
kind = gbm
mu = 0.05
sigma = 0.25
q = 0.15

[reward]
name = put
K = 5

[grids]
s_min = 5
s_max = 5
n_s = 1
n_x = 25
"""


# ----------------------------------------------------------------- parsing

def test_loads_basic():
    cfg = loads_config(BASE)
    assert cfg.model["kind"] == "gbm"
    assert cfg.model["mu"] == 0.05
    assert cfg.reward["K"] == 5 and cfg.reward["k"] == 0.5
    assert cfg.grids["n_s"] == 4
    assert cfg.mc["points"] == ((25.0, 25.0),)
    assert cfg.verify_points == [(25.0, 25.0)]


def test_build_objects():
    cfg = loads_config(BASE)
    model = cfg.build_model()
    assert model.gamma1 == pytest.approx(1.9113344387495979)
    reward = cfg.build_reward()
    assert reward.name == "power_sum"
    mc = cfg.build_mc()
    assert mc.n_paths == 4000 and mc.seed == 20260823


def test_build_mc_requires_section():
    cfg = loads_config(PUT)
    with pytest.raises(ConfigError):
        cfg.build_mc()
    assert cfg.verify_points == []


@pytest.mark.parametrize("mangle, needle", [
    (lambda t: t.replace("[model]", "[nomodel]"), "model"),
    (lambda t: t.replace("kind = gbm", "kind = heston"), "kind"),
    (lambda t: t.replace("name = power_sum", "name = asian"), "name"),
    (lambda t: t.replace("s_min = 10", "s_min = 50"), "s_min"),
    (lambda t: t.replace("n_x = 30", "n_x = 1"), "n_x"),
    (lambda t: t.replace("points = 25:25", "points = 25"), "point"),
    (lambda t: t.replace("mu = 0.05", "nu = 0.05"), "nu"),
])
def test_invalid_configs_raise(mangle, needle):
    with pytest.raises(ConfigError) as exc:
        loads_config(mangle(BASE))
    assert needle in str(exc.value)


def test_reward_rejects_foreign_params():
    bad = BASE.replace("name = power_sum", "name = russian")
    with pytest.raises(ConfigError):
        loads_config(bad)


def test_strike_and_shape_keys_are_distinct():
    # K (strike) and k (shape) must not be folded together by the parser
    cfg = loads_config(BASE)
    assert cfg.reward["K"] == 5
    assert cfg.reward["k"] == 0.5


def test_load_missing_file_raises(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.cfg"))


def test_dump_round_trip():
    cfg = loads_config(BASE)
    text = dump_config(cfg)
    again = loads_config(text)
    assert again == cfg
    assert dump_config(again) == text  # canonical form is a fixed point


def test_validate_direct():
    cfg = ProblemConfig(model={"kind": "gbm", "mu": 0.05, "sigma": 0.25,
                               "q": 0.15},
                        reward={"name": "russian"},
                        grids={"s_min": 1, "s_max": 2, "n_s": 2, "n_x": 5})
    validate(cfg)
    cfg.grids["n_s"] = 0
    with pytest.raises(ConfigError):
        validate(cfg)


# --------------------------------------------------------------------- CLI

@pytest.fixture()
def cfg_file(tmp_path):
    p = tmp_path / "problem.cfg"
    p.write_text(BASE)
    return str(p)


@pytest.fixture()
def put_file(tmp_path):
    p = tmp_path / "put.cfg"
    p.write_text(PUT)
    return str(p)


def test_cli_solve(cfg_file, tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = main(["solve", cfg_file, "--s", "35", "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "case = deep_stop" in text
    data = np.genfromtxt(tmp_path / "out" / "diag_s=35.csv",
                         delimiter=",", names=True,
                         dtype=None, encoding="utf-8")
    assert len(data) == 30
    assert data["x"][-1] == pytest.approx(35.0)
    # the last column value matches the printed diagonal value
    v_line = [ln for ln in text.splitlines() if ln.startswith("V(s,s)")][0]
    assert float(v_line.split("=")[1]) == pytest.approx(float(data["V"][-1]),
                                                        rel=1e-6)


def test_cli_solve_deterministic(cfg_file, tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["solve", cfg_file, "--s", "20", "--out", out1]) == 0
    assert main(["solve", cfg_file, "--s", "20", "--out", out2]) == 0
    f1 = (tmp_path / "a" / "diag_s=20.csv").read_text()
    f2 = (tmp_path / "b" / "diag_s=20.csv").read_text()
    assert f1 == f2


def test_cli_solve_debug_envelope(cfg_file, tmp_path):
    out = str(tmp_path / "out")
    rc = main(["solve", cfg_file, "--s", "20", "--out", out,
               "--debug-envelope"])
    assert rc == 0
    dbg = np.genfromtxt(tmp_path / "out" / "envelope_s=20.csv",
                        delimiter=",", names=True)
    assert np.all(dbg["W"] >= dbg["H"] - 1e-9)


def test_cli_diagram(cfg_file, tmp_path, capsys):
    out = str(tmp_path / "out")
    rc = main(["diagram", cfg_file, "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "s_hat = 8.64" in text
    surface = (tmp_path / "out" / "surface.csv").read_text().splitlines()
    assert surface[0] == "s,x,V,region"
    assert len(surface) > 50
    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert summary.startswith("[summary]")
    bnd = np.genfromtxt(tmp_path / "out" / "boundaries.csv",
                        delimiter=",", names=True)
    assert len(bnd) == 4


def test_cli_diagram_single_level(put_file, tmp_path):
    out = str(tmp_path / "out")
    rc = main(["diagram", put_file, "--out", out])
    assert rc == 0
    bnd = np.genfromtxt(tmp_path / "out" / "boundaries.csv",
                        delimiter=",", names=True)
    assert float(bnd["x_star"]) == pytest.approx(3.576039939453753, rel=1e-5)


def test_cli_verify(cfg_file, tmp_path, capsys):
    # (25, 25) is a stop-now point: the MC estimate is the deterministic
    # payoff and the z-score is exactly zero
    out = str(tmp_path / "out")
    rc = main(["verify", cfg_file, "--out", out])
    assert rc == 0
    text = capsys.readouterr().out
    assert "z +0.000" in text
    report = (tmp_path / "out" / "verify.csv").read_text().splitlines()
    assert report[0].startswith("x0,s0,analytic")
    assert len(report) == 2


def test_cli_verify_without_points(put_file, tmp_path, capsys):
    rc = main(["verify", put_file, "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "config error" in capsys.readouterr().err


def test_cli_dump_config(cfg_file, capsys):
    rc = main(["dump-config", cfg_file])
    assert rc == 0
    text = capsys.readouterr().out
    assert loads_config(text) == loads_config(BASE)


def test_cli_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("[model]\nkind = heston\n")
    rc = main(["solve", str(p), "--s", "10"])
    assert rc == 1
    assert "config error" in capsys.readouterr().err


def test_cli_missing_file_exit_code(tmp_path, capsys):
    rc = main(["solve", str(tmp_path / "absent.cfg"), "--s", "10"])
    assert rc == 1


def test_cli_solver_error_exit_code(cfg_file, tmp_path, capsys):
    # a level outside the state space is a solver error, not a config error
    rc = main(["solve", cfg_file, "--s", "-3", "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "solver error" in capsys.readouterr().err
