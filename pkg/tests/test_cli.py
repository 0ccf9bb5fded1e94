import csv
import json

import numpy as np
import pytest

from curvedqw import cli, snapshot


def write_config(path, **over):
    cfg = {
        "lattice": {"kind": "honeycomb", "n1": 16, "n2": 16, "epsilon": 0.2},
        "metric": {"family": "flat"},
        "mass": 0.5,
        "time": {"steps": 100},
        "initial": {"gaussian": {"width": 1.0, "momentum": [1.0, 0.0]}},
        "output": {"dump_every": 50},
    }
    cfg.update(over)
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(verb, cfg, out, *extra):
    return cli.main([verb, "--config", str(cfg), "--out", str(out), "--quiet", *extra])


def test_flat_run_observables(tmp_path):
    cfg = write_config(tmp_path / "c.json")
    assert run("run", cfg, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "observables.csv")
    assert rows[0] == ["step", "time", "norm", "mean_x", "mean_y", "spread"]
    assert len(rows) == 102
    norms = np.array([float(r[2]) for r in rows[1:]])
    assert np.abs(norms - norms[0]).max() < 1e-12
    snaps = sorted(p.name for p in (tmp_path / "out").glob("*.cqw"))
    assert snaps == ["snapshot_000000.cqw", "snapshot_000050.cqw", "snapshot_000100.cqw"]
    assert snapshot.read(tmp_path / "out" / snaps[-1]).dims == (16, 16)


def test_run_is_bitwise_reproducible(tmp_path):
    # 80 x 80 sites spans several coin continuation bands
    cfg = write_config(tmp_path / "c.json", metric={"family": "conformal", "f": "1+0.3*sin(x)*sin(y)"},
                       lattice={"kind": "honeycomb", "n1": 80, "n2": 80, "epsilon": 0.1},
                       time={"steps": 20}, output={"dump_every": 10})
    assert run("run", cfg, tmp_path / "a", "--threads", "1") == 0
    assert run("run", cfg, tmp_path / "b", "--threads", "3") == 0
    for name in ("observables.csv", "snapshot_000010.cqw", "snapshot_000020.cqw"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_triangular_run_and_densities(tmp_path):
    cfg = write_config(tmp_path / "c.json",
                       lattice={"kind": "triangular", "n1": 8, "n2": 8, "epsilon": 0.2},
                       time={"steps": 10}, output={"observables": ["norm", "densities"]})
    assert run("run", cfg, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "observables.csv")
    assert rows[0][-2:] == ["density_up", "density_down"]
    assert len(rows) == 12
    snap = snapshot.read(tmp_path / "out" / "snapshot_000010.cqw")
    assert snap.kind == "triangular" and snap.spinors_per_cell == 3


def test_square_infeasible_exit_code(tmp_path, caplog):
    cfg = write_config(tmp_path / "c.json",
                       lattice={"kind": "square", "n1": 8, "n2": 8, "epsilon": 0.2},
                       metric={"family": "homogeneous", "lambda": [[2.5, 0], [0, 1]]})
    assert run("run", cfg, tmp_path / "out") == 3
    assert "unit-norm" in caplog.text


def test_config_error_exit_code(tmp_path, caplog):
    cfg = write_config(tmp_path / "c.json",
                       lattice={"kind": "hexagon", "n1": 8, "n2": 8, "epsilon": 0.2})
    assert run("run", cfg, tmp_path / "out") == 2
    assert "/lattice/kind" in caplog.text
    assert run("run", tmp_path / "missing.json", tmp_path / "out") == 2


def test_oracle_drift_exit_code(tmp_path):
    # a single-site excitation is all grid-scale content, which RK4 damps past the drift budget
    cfg = write_config(tmp_path / "c.json", metric={"family": "conformal", "f": "1+0.1*sin(x)"},
                       initial={"delta": {}}, mass=0.0, time={"steps": 5})
    assert run("oracle", cfg, tmp_path / "out") == 4


def test_oracle_verb(tmp_path):
    cfg = write_config(tmp_path / "c.json", time={"steps": 5})
    assert run("oracle", cfg, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "oracle_observables.csv")
    assert len(rows) == 3 and rows[2][0] == "5"
    assert (tmp_path / "out" / "oracle_000005.cqw").exists()


def test_compile_verb(tmp_path):
    cfg = write_config(tmp_path / "c.json", metric={"family": "conformal", "f": "1+0.3*sin(x)"},
                       lattice={"kind": "honeycomb", "n1": 4, "n2": 4, "epsilon": 0.2})
    assert run("compile", cfg, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "coins.csv")
    assert rows[0][:3] == ["a", "b", "direction"]
    assert len(rows) == 1 + 4 * 4 * 3
    summary = json.loads((tmp_path / "out" / "coins.json").read_text())
    assert summary["c1_residual"] < 1e-10 and summary["c2_residual"] < 1e-12


def test_dispersion_verb(tmp_path):
    cfg = write_config(tmp_path / "c.json", metric={"family": "homogeneous", "lambda": [[0.8, 0], [0, 1]]},
                       dispersion={"k": [[0.1, 0.0], [0.0, 0.2]]}, mass=0.0)
    assert run("dispersion", cfg, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "dispersion.csv")
    assert len(rows) == 3
    hi, cont = float(rows[1][3]), float(rows[1][5])
    assert hi == pytest.approx(cont, rel=1e-2)
    assert cont == pytest.approx(0.2 * 0.8 * 0.1)


def test_study_verb(tmp_path):
    cfg = write_config(tmp_path / "c.json", lattice={"kind": "honeycomb", "n1": 16, "n2": 16, "epsilon": 0.4},
                       time={"steps": 2}, mass=0.0, study={"epsilons": [0.4, 0.2, 0.1]})
    assert run("study", cfg, tmp_path / "out") == 0
    rows = read_csv(tmp_path / "out" / "study.csv")
    assert rows[0] == ["epsilon", "l2_error"] and len(rows) == 4
    rep = json.loads((tmp_path / "out" / "study.json").read_text())
    assert 0.7 < rep["slope"] < 1.3
    assert run("study", write_config(tmp_path / "d.json"), tmp_path / "o2") == 2


def test_threads_env_override(monkeypatch):
    monkeypatch.setenv("CQW_THREADS", "3")
    assert cli.resolve_threads(8) == 3
    monkeypatch.delenv("CQW_THREADS")
    assert cli.resolve_threads(5) == 5
    assert cli.resolve_threads(None) >= 1
    monkeypatch.setenv("CQW_THREADS", "x")
    with pytest.raises(cli.ConfigError):
        cli.resolve_threads(None)


def test_bad_verb_exits():
    with pytest.raises(SystemExit):
        cli.main(["explode", "--config", "x"])
