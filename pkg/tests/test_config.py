import json

import pytest

from curvedqw.coins import compile_coins
from curvedqw.config import ConfigError, config_from_dict, load_config, parse_config
from curvedqw.geometry import ConformalMetric, CustomMetric, FlatMetric, HomogeneousMetric
from curvedqw.lattice import BravaisGrid, honeycomb_directions


def minimal(**over):
    cfg = {
        "lattice": {"kind": "honeycomb", "n1": 16, "n2": 16, "epsilon": 0.2},
        "metric": {"family": "flat"},
        "time": {"steps": 10},
        "initial": {"gaussian": {"width": 1.0}},
    }
    cfg.update(over)
    return cfg


def test_minimal_defaults():
    cfg = parse_config(json.dumps(minimal()))
    assert cfg.dump_every == 10
    assert cfg.observables == ["norm"]
    assert cfg.mass == 0.0
    assert isinstance(cfg.metric, FlatMetric)
    assert cfg.T == pytest.approx(2.0)
    assert cfg.study is None and cfg.recompile_every is None


def test_enum_error_names_field_and_values():
    raw = minimal(lattice={"kind": "hexagon", "n1": 4, "n2": 4, "epsilon": 0.1})
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.pointer == "/lattice/kind"
    assert "hexagon" in str(info.value)
    assert "honeycomb" in str(info.value) and "triangular" in str(info.value)


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError) as info:
        config_from_dict(minimal(colour="blue"))
    assert "colour" in str(info.value)
    raw = minimal()
    raw["lattice"]["spacing"] = 1
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.pointer == "/lattice"
    raw = minimal(metric={"family": "conformal", "f": "1", "g_xx": "-1"})
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_exactly_one_initial_state():
    with pytest.raises(ConfigError):
        config_from_dict(minimal(initial={}))
    with pytest.raises(ConfigError):
        config_from_dict(minimal(initial={"gaussian": {}, "delta": {}}))


def test_time_consistency():
    cfg = config_from_dict(minimal(time={"T": 1.0}))
    assert cfg.steps == 5
    config_from_dict(minimal(time={"T": 2.0, "steps": 10}))
    with pytest.raises(ConfigError) as info:
        config_from_dict(minimal(time={"T": 1.0, "steps": 10}))
    assert info.value.pointer == "/time"
    with pytest.raises(ConfigError) as info:
        config_from_dict(minimal(time={"T": 0.3}))
    assert info.value.pointer == "/time/T"


def test_positive_dims_and_epsilon():
    with pytest.raises(ConfigError):
        config_from_dict(minimal(lattice={"kind": "square", "n1": 1, "n2": 4, "epsilon": 0.1}))
    with pytest.raises(ConfigError) as info:
        config_from_dict(minimal(lattice={"kind": "square", "n1": 4, "n2": 4, "epsilon": 0}))
    assert info.value.pointer == "/lattice/epsilon"


def test_metric_families():
    cfg = config_from_dict(minimal(metric={"family": "homogeneous", "lambda": [[0.8, 0], [0, 1]]}))
    assert isinstance(cfg.metric, HomogeneousMetric)
    cfg = config_from_dict(minimal(metric={"family": "custom", "g_xx": "-(1+0.1*sin(y))^2"}))
    assert isinstance(cfg.metric, CustomMetric)


def test_conformal_config_compiles_everywhere():
    cfg = config_from_dict(minimal(metric={"family": "conformal", "f": "1+0.3*sin(x)"}))
    assert isinstance(cfg.metric, ConformalMetric)
    coins = compile_coins(cfg.metric, BravaisGrid(cfg.n1, cfg.n2, cfg.epsilon, honeycomb_directions()))
    assert coins.residual < 1e-10
    assert coins.n.shape == (3, 16, 16, 3)


def test_expression_error_has_field_context():
    with pytest.raises(ConfigError) as info:
        config_from_dict(minimal(metric={"family": "conformal", "f": "1+*x"}))
    assert info.value.pointer == "/metric/f"
    assert "offset 2" in str(info.value)


def test_study_epsilons_must_halve():
    cfg = config_from_dict(minimal(study={"epsilons": [0.2, 0.1, 0.05]}))
    assert cfg.study["epsilons"] == [0.2, 0.1, 0.05]
    with pytest.raises(ConfigError) as info:
        config_from_dict(minimal(study={"epsilons": [0.2, 0.1, 0.04]}))
    assert info.value.pointer == "/study/epsilons/2"
    with pytest.raises(ConfigError):
        config_from_dict(minimal(study={"epsilons": [0.2, 0.1]}))


def test_invalid_json_and_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "ok.json"
    p.write_text(json.dumps(minimal()))
    assert load_config(p).n1 == 16


def test_output_section():
    cfg = config_from_dict(minimal(output={"directory": "x", "dump_every": 2,
                                           "observables": ["norm", "densities"]}))
    assert cfg.output_dir == "x" and cfg.dump_every == 2
    with pytest.raises(ConfigError):
        config_from_dict(minimal(output={"observables": ["energy"]}))
