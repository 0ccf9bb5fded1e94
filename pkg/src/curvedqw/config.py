"""Run configuration: strict JSON schema, defaults and conversion to library objects."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import jsonschema

from .expr import ExpressionError
from .geometry import ConformalMetric, CustomMetric, FlatMetric, HomogeneousMetric, MetricFamily


class ConfigError(ValueError):
    """Invalid configuration; ``pointer`` is the JSON pointer of the offending field."""

    def __init__(self, message, pointer=""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int_pos = {"type": "integer", "minimum": 1}
_vec2 = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_expr_or_num = {"type": ["string", "number"]}
_complex = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}
_spinor = {"type": "array", "items": _complex, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


OBSERVABLES = ["norm", "mean", "spread", "densities"]

SCHEMA = _obj(
    {
        "lattice": _obj(
            {
                "kind": {"enum": ["honeycomb", "triangular", "square"]},
                "n1": {"type": "integer", "minimum": 2},
                "n2": {"type": "integer", "minimum": 2},
                "epsilon": _pos,
            },
            ["kind", "n1", "n2", "epsilon"],
        ),
        "metric": {
            "type": "object",
            "required": ["family"],
            "properties": {"family": {"enum": ["flat", "homogeneous", "conformal", "custom"]}},
            "allOf": [
                {"if": {"properties": {"family": {"const": "flat"}}},
                 "then": _obj({"family": {}})},
                {"if": {"properties": {"family": {"const": "homogeneous"}}},
                 "then": _obj({"family": {}, "lambda": {
                     "type": "array", "minItems": 2, "maxItems": 2,
                     "items": {"type": "array", "items": _expr_or_num, "minItems": 2, "maxItems": 2},
                 }}, ["family", "lambda"])},
                {"if": {"properties": {"family": {"const": "conformal"}}},
                 "then": _obj({"family": {}, "f": _expr_or_num}, ["family", "f"])},
                {"if": {"properties": {"family": {"const": "custom"}}},
                 "then": _obj({"family": {}, "g_tt": _expr_or_num, "g_xx": _expr_or_num,
                               "g_yy": _expr_or_num, "g_xy": _expr_or_num}, ["family"])},
            ],
        },
        "mass": _num,
        "time": {**_obj({"steps": {"type": "integer", "minimum": 0},
                         "T": {"type": "number", "minimum": 0}}),
                 "minProperties": 1},
        "initial": {
            "type": "object",
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
            "properties": {
                "gaussian": _obj({"center": _vec2, "width": _pos, "momentum": _vec2,
                                  "spinor": _spinor}),
                "plane_wave": _obj({"k": _vec2, "branch": {"enum": [1, -1]}}, ["k"]),
                "delta": _obj({"site": {"type": "array", "items": {"type": "integer"},
                                        "minItems": 2, "maxItems": 3},
                               "spinor": _spinor}),
            },
        },
        "output": _obj({
            "directory": {"type": "string"},
            "dump_every": {"type": "integer", "minimum": 0},
            "observables": {"type": "array", "items": {"enum": OBSERVABLES}, "uniqueItems": True},
        }),
        "study": _obj({
            "epsilons": {"type": "array", "items": _pos, "minItems": 3},
            "time": _pos,
        }, ["epsilons"]),
        "dispersion": _obj({"k": {"type": "array", "items": _vec2, "minItems": 1}}),
        "recompile_every": _int_pos,
    },
    ["lattice", "metric", "time", "initial"],
)


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


@dataclass
class RunConfig:
    kind: str
    n1: int
    n2: int
    epsilon: float
    metric: MetricFamily
    mass: float
    steps: int
    initial: dict
    output_dir: str | None
    dump_every: int
    observables: list
    study: dict | None = None
    dispersion_k: list | None = None
    recompile_every: int | None = None
    raw: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.steps * self.epsilon


def _complex_value(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def spinor_value(s, default=(1.0, 0.0)):
    if s is None:
        return tuple(complex(v) for v in default)
    return tuple(_complex_value(v) for v in s)


def build_metric(m: dict) -> MetricFamily:
    fam = m["family"]
    try:
        if fam == "flat":
            return FlatMetric()
        if fam == "homogeneous":
            return HomogeneousMetric(m["lambda"])
        if fam == "conformal":
            return ConformalMetric(m["f"])
        return CustomMetric(**{k: v for k, v in m.items() if k != "family"})
    except ExpressionError as exc:
        field_name = str(exc.args[0]).split(":", 1)[0]
        ptr = "/metric/" + field_name.replace("[", "/").replace("]", "")
        raise ConfigError(f"expression error at offset {exc.offset}: {exc.args[0]}", ptr) from None
    except ValueError as exc:
        raise ConfigError(str(exc), "/metric") from None


def parse_config(text: str) -> RunConfig:
    """Validate JSON text and apply defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from None
    return config_from_dict(raw)


def config_from_dict(raw) -> RunConfig:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        ptr = _pointer(err.absolute_path)
        msg = err.message
        if err.validator == "enum":
            msg = f"{err.instance!r} is not one of {err.validator_value}"
        raise ConfigError(msg, ptr)
    lat = raw["lattice"]
    eps = float(lat["epsilon"])
    if lat["kind"] == "triangular" and (lat["n1"] < 2 or lat["n2"] < 2):
        raise ConfigError("triangular lattices need at least 2 x 2 cells", "/lattice")
    tm = raw["time"]
    if "steps" in tm:
        steps = int(tm["steps"])
        if "T" in tm and not math.isclose(steps * eps, tm["T"], rel_tol=1e-9, abs_tol=1e-12):
            raise ConfigError(f"T = {tm['T']} is inconsistent with steps * epsilon = {steps * eps}", "/time")
    else:
        n = tm["T"] / eps
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"T = {tm['T']} is not an integer multiple of epsilon = {eps}", "/time/T")
        steps = int(round(n))
    metric = build_metric(raw["metric"])
    out = raw.get("output", {})
    dump_every = out.get("dump_every", steps)
    study = raw.get("study")
    if study is not None:
        eps_list = study["epsilons"]
        for i, (a, b) in enumerate(zip(eps_list, eps_list[1:])):
            if not math.isclose(a, 2 * b, rel_tol=1e-9):
                raise ConfigError("study epsilons must halve successively", f"/study/epsilons/{i + 1}")
    return RunConfig(
        kind=lat["kind"], n1=int(lat["n1"]), n2=int(lat["n2"]), epsilon=eps,
        metric=metric, mass=float(raw.get("mass", 0.0)), steps=steps,
        initial=raw["initial"], output_dir=out.get("directory"), dump_every=int(dump_every),
        observables=list(out.get("observables", ["norm"])), study=study,
        dispersion_k=(raw.get("dispersion") or {}).get("k"),
        recompile_every=raw.get("recompile_every"), raw=raw,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_config(text)
