"""Declarative run configuration.

A run is a single YAML file with a scenario section plus one section per
command.  The schema is validated against the composed YAML node tree, so
errors carry the line number of the offending key, and unknown keys are
rejected outright.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
import yaml

from .engine import WEIGHT_BUILTINS, AffineWeights, Scenario
from .laws import ParticleLaw, custom_law, law_by_name
from .montecarlo import MCPlan
from .weights import DiscreteMeasure, OutlierTrack, SupportSet, WeightArraySpec


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str = ""):
        self.line = line
        self.path = path
        where = f" (line {line})" if line is not None else ""
        at = f" at {path}" if path else ""
        super().__init__(f"config error{at}{where}: {message}")


# Schema DSL: "float" | "int" | "str" | "bool" | ("list", sub) | ("map", {...})
# | ("or", sub1, sub2, ...)

_TRACK = ("map", {
    "limits": ("list", "float"),
    "approach": ("list", "float"),
    "name": "str",
})

_MEASURE = ("map", {"atoms": ("list", ("list", "float"))})

_SCENARIO = ("map", {
    "law": "str",
    "custom_law": ("map", {
        "dim": "int",
        "terms": ("list", ("map", {
            "shape": "float",
            "direction": ("list", "float"),
            "rate": "float",
        })),
    }),
    "measure": _MEASURE,
    "support": ("or",
                ("map", {"interval": ("list", "float")}),
                ("map", {"atoms": ("list", "float")})),
    "tracks": ("list", _TRACK),
    "weights": ("or", "str", ("map", {
        "base": ("list", ("list", "float")),
        "slope": ("list", ("list", "float")),
    })),
    "horizon": "int",
})

SCHEMA = ("map", {
    "seed": "int",
    "output": ("map", {"dir": "str", "prefix": "str"}),
    "scenario": _SCENARIO,
    "rate": ("map", {
        "z": ("list", ("list", "float")),
        "grid": ("map", {
            "lo": ("list", "float"),
            "hi": ("list", "float"),
            "nodes": ("list", "int"),
        }),
        "route": "str",
    }),
    "a4": ("map", {}),
    "mc": ("map", {
        "z": ("list", "float"),
        "delta": "float",
        "n_list": ("list", "int"),
        "trials": "int",
        "tilt": ("or", "str", ("list", "float")),
        "rel_tol": "float",
        "computed_rate": "float",
        "subsequence": ("map", {
            "z": "float",
            "even": ("list", "int"),
            "odd": ("list", "int"),
            "trials": "int",
            "rel_tol": "float",
        }),
    }),
    "gauss2d": ("map", {
        "measure": _MEASURE,
        "x_min": "float",
        "x_max": "float",
        "nodes": "int",
    }),
    "nonconvex": ("map", {"k1": "float", "k2": "float"}),
    "spherical": ("map", {"theta": "float"}),
})


def _line(node) -> int:
    return node.start_mark.line + 1


def _convert(node, schema, path: str):
    if isinstance(schema, tuple) and schema[0] == "or":
        errors = []
        for sub in schema[1:]:
            try:
                return _convert(node, sub, path)
            except ConfigError as e:
                errors.append(str(e))
        raise ConfigError("; no alternative matched: " + " | ".join(errors),
                          _line(node), path)
    if schema == "str":
        if not isinstance(node, yaml.ScalarNode):
            raise ConfigError("expected a string", _line(node), path)
        return str(node.value)
    if schema in ("float", "int", "bool"):
        if not isinstance(node, yaml.ScalarNode):
            raise ConfigError(f"expected a {schema}", _line(node), path)
        raw = node.value
        try:
            if schema == "bool":
                if raw.lower() in ("true", "yes", "on"):
                    return True
                if raw.lower() in ("false", "no", "off"):
                    return False
                raise ValueError(raw)
            if schema == "int":
                val = int(raw)
            else:
                val = float(raw)
        except ValueError:
            raise ConfigError(f"expected a {schema}, got {raw!r}", _line(node), path) from None
        return val
    kind = schema[0]
    if kind == "list":
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigError("expected a list", _line(node), path)
        return [
            _convert(child, schema[1], f"{path}[{i}]")
            for i, child in enumerate(node.value)
        ]
    if kind == "map":
        if not isinstance(node, yaml.MappingNode):
            raise ConfigError("expected a mapping", _line(node), path)
        allowed = schema[1]
        out = {}
        for key_node, val_node in node.value:
            key = str(key_node.value)
            sub_path = f"{path}.{key}" if path else key
            if key not in allowed:
                raise ConfigError(
                    f"unknown key {key!r}; allowed: {sorted(allowed)}",
                    _line(key_node),
                    sub_path,
                )
            out[key] = _convert(val_node, allowed[key], sub_path)
        return out
    raise AssertionError(f"bad schema node {schema!r}")


def parse_config_text(text: str) -> dict[str, Any]:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid YAML: {e}", line) from None
    if node is None:
        raise ConfigError("empty config")
    return _convert(node, SCHEMA, "")


def load_config(path) -> dict[str, Any]:
    with open(path) as fh:
        return parse_config_text(fh.read())


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    prefix: str = "run"


def output_spec(cfg: dict) -> OutputSpec:
    out = cfg.get("output", {})
    return OutputSpec(dir=out.get("dir", "out"), prefix=out.get("prefix", "run"))


def build_law(sec: dict) -> ParticleLaw:
    name = sec.get("law", "chisq1")
    if name == "custom":
        spec = sec.get("custom_law")
        if not spec:
            raise ConfigError("law 'custom' needs a custom_law section", path="scenario.custom_law")
        terms = [(t["shape"], tuple(t["direction"]), t["rate"]) for t in spec["terms"]]
        return custom_law(spec["dim"], terms)
    try:
        return law_by_name(name)
    except ValueError as e:
        raise ConfigError(str(e), path="scenario.law") from None


def build_weights(sec: dict) -> AffineWeights:
    w = sec.get("weights", "scalar")
    if isinstance(w, str):
        if w not in WEIGHT_BUILTINS:
            raise ConfigError(
                f"unknown weight map {w!r}; built-ins: {sorted(WEIGHT_BUILTINS)}",
                path="scenario.weights",
            )
        return WEIGHT_BUILTINS[w]()
    return AffineWeights(np.array(w["base"]), np.array(w["slope"]))


def build_scenario(cfg: dict) -> Scenario:
    sec = cfg.get("scenario")
    if not sec:
        raise ConfigError("missing scenario section", path="scenario")
    law = build_law(sec)
    measure_pairs = sec.get("measure", {}).get("atoms", [[1.0, 1.0]])
    measure = DiscreteMeasure.from_pairs([(p[0], p[1]) for p in measure_pairs])
    sup = sec.get("support")
    if sup is None:
        support = SupportSet(atoms=measure.atoms.copy())
    elif "interval" in sup:
        lo, hi = sup["interval"]
        support = SupportSet(interval=(float(lo), float(hi)))
    else:
        support = SupportSet(atoms=np.array(sup["atoms"], dtype=float))
    tracks = tuple(
        OutlierTrack(
            limits=tuple(t["limits"]),
            approach=tuple(t.get("approach", ())),
            name=t.get("name", ""),
        )
        for t in sec.get("tracks", [])
    )
    array = WeightArraySpec(bulk=measure, support=support, tracks=tracks)
    return Scenario(
        law=law,
        array=array,
        weights=build_weights(sec),
        horizon=sec.get("horizon", 10_000),
    )


def build_mc_plan(cfg: dict, scenario: Scenario) -> MCPlan:
    sec = cfg.get("mc")
    if not sec:
        raise ConfigError("missing mc section", path="mc")
    tilt = sec.get("tilt", "auto")
    tilt_vec = None if tilt == "auto" else np.array(tilt, dtype=float)
    if isinstance(tilt, str) and tilt != "auto":
        raise ConfigError("tilt must be 'auto' or a vector", path="mc.tilt")
    return MCPlan(
        scenario=scenario,
        z=np.array(sec["z"], dtype=float),
        delta=float(sec["delta"]),
        n_list=tuple(sec["n_list"]),
        trials=int(sec["trials"]),
        tilt=tilt_vec,
        seed=int(cfg.get("seed", 0)),
        rel_tol=float(sec.get("rel_tol", 0.15)),
        computed_rate=sec.get("computed_rate"),
    )
