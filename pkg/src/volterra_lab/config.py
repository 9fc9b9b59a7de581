"""Experiment configuration: TOML in, fully resolved and validated dict out.

A configuration is a set of named blocks.  Every field has a default, so a
file only needs the fields it changes; :func:`resolve` expands defaults and
checks types and ranges, raising :class:`ConfigError` with the dotted path of
the offending field.  The resolved form round-trips through TOML unchanged
and its hash (excluding runtime-only fields) tags every output record.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

__all__ = [
    "COMMANDS",
    "SCHEMA",
    "ExperimentConfig",
    "resolve",
    "load_config",
    "loads_config",
    "dumps_config",
    "config_hash",
    "set_path",
    "get_path",
]

COMMANDS = ("simulate", "occupation", "regularity", "density", "sewing", "young2d",
            "selfinteract", "stability", "sweep")
PROCESS_KINDS = ("brownian", "fbm", "volterra", "power", "smooth")
DRIFT_PRESETS = ("skew_delta0", "edwards_grad_delta0", "edwards_fractional", "durrett_rogers",
                 "gaussian", "zero")
# Fields that change how a run executes but not what it computes.
RUNTIME_ONLY = (("threads",), ("output",))


@dataclass(frozen=True)
class Field:
    kind: str  # int, float, bool, str, list, table, float_or_auto, float_or_list
    default: Any
    check: Callable[[Any], bool] | None = None
    hint: str = ""
    choices: tuple[str, ...] | None = None


def _pos(x) -> bool:
    return x > 0


def _nonneg(x) -> bool:
    return x >= 0


def _unit(x) -> bool:
    return 0 < x < 1


SCHEMA: dict[str, Any] = {
    "command": Field("str", "simulate", choices=COMMANDS),
    "name": Field("str", ""),
    "seed": Field("int", 0, _nonneg, "must be >= 0"),
    "threads": Field("int", 1, _pos, "must be >= 1"),
    "grid": {
        "horizon_T": Field("float", 1.0, _pos, "must be > 0"),
        "n_steps": Field("int", 1024, _pos, "must be >= 1"),
    },
    "ensemble": {
        "n_paths": Field("int", 1, _pos, "must be >= 1"),
    },
    "process": {
        "kind": Field("str", "brownian", choices=PROCESS_KINDS),
        "dim": Field("int", 1, _pos, "must be >= 1"),
        "H": Field("float", 0.5, _unit, "must lie in (0, 1)"),
        "x0": Field("float", 0.0),
        "drift": Field("float", 0.0),
        "diffusion": Field("float", 1.0),
        "b0": Field("float", 1.0, _nonneg, "must be >= 0"),
        "beta": Field("float", -0.5),
        "theta": Field("float", 0.5, lambda x: 0.5 <= x <= 1.0, "must lie in [1/2, 1]"),
        "amplitude": Field("float", 0.8),
        "frequency": Field("float", 1.0),
        "slope": Field("float", 0.3),
        "bound": Field("float", 1e8, _pos, "must be > 0"),
        "kernel_b": Field("table", {"family": "rl", "H": 0.5, "role": "drift"}),
        "kernel_sigma": Field("table", {"family": "rl", "H": 0.5, "role": "diffusion"}),
    },
    "certificate": {
        "enabled": Field("bool", False),
        "H_hypothesis": Field("float", 0.5, _pos, "must be > 0"),
        "n_nodes": Field("int", 8, lambda x: x >= 2, "must be >= 2"),
        "tolerance": Field("float", 0.1, _pos, "must be > 0"),
    },
    "weight": {
        "kind": Field("str", "one", choices=("one", "state_power")),
        "exponent": Field("float", 1.0, lambda x: 0 < x <= 1, "must lie in (0, 1]"),
    },
    "spectral": {
        "xi_max": Field("float", 128.0, _pos, "must be > 0"),
        "spacing": Field("float", 1.0, _pos, "must be > 0"),
    },
    "occupation": {
        "delta": Field("float", 0.0, _nonneg, "must be >= 0"),
        "pairs": Field("list", [], hint="list of [s, t] pairs; empty means [[0, T]]"),
        "xi": Field("list", [], hint="frequencies; empty means the spectral grid"),
        "p": Field("float", 2.0, lambda x: x >= 1, "must be >= 1"),
        "local_time_points": Field("int", 0, _nonneg, "must be >= 0"),
        "local_time_window": Field("list", [-3.0, 3.0]),
    },
    "regularity": {
        "zeta": Field("float", math.inf, _pos, "must be > 0"),
        "delta": Field("float", 0.0, _nonneg, "must be >= 0"),
        "chi": Field("float", 1.0, lambda x: 0 <= x <= 1, "must lie in [0, 1]"),
        "xi_min": Field("float", 8.0, _pos, "must be > 0"),
        "xi_max": Field("float", 64.0, _pos, "must be > 0"),
        "n_xi": Field("int", 12, lambda x: x >= 6, "must be >= 6"),
        "p": Field("float", 2.0, lambda x: x >= 1, "must be >= 1"),
        "tolerance": Field("float", 0.2, _nonneg, "must be >= 0"),
    },
    "density": {
        "t": Field("float", 0.0, _nonneg, "must be >= 0 (0 means the horizon)"),
        "delta": Field("float", 0.0, _nonneg, "must be >= 0"),
        "xi_min": Field("float", 1.0, _pos, "must be > 0"),
        "xi_max": Field("float", 16.0, _pos, "must be > 0"),
        "n_xi": Field("int", 12, lambda x: x >= 6, "must be >= 6"),
    },
    "sewing": {
        "germ": Field("str", "smooth", choices=("smooth", "additive", "occupation")),
        "xi": Field("float", 8.0),
        "levels": Field("list", [2, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
        "s": Field("float", 0.0, _nonneg, "must be >= 0"),
        "t": Field("float", 0.0, _nonneg, "must be >= 0 (0 means the horizon)"),
        "eta": Field("float", 0.25, lambda x: 0 < x < 0.5, "must lie in (0, 1/2)"),
    },
    "young2d": {
        "theta": Field("str", "smooth", choices=("smooth", "process")),
        "corner": Field("list", [0.25, 0.5]),
        "h0": Field("float", 0.125, _pos, "must be > 0"),
        "n_sizes": Field("int", 5, lambda x: x >= 5, "must be >= 5"),
        "oracle_level": Field("int", 12, _pos, "must be >= 1"),
        "level": Field("int", 10, _nonneg, "must be >= 0"),
    },
    "drift": {
        "preset": Field("str", "skew_delta0", choices=DRIFT_PRESETS),
        "alpha": Field("float", 0.5, _pos, "must be > 0"),
        "scale": Field("float", 1.0, _pos, "must be > 0"),
        "amplitude": Field("float", 1.0),
        "mollify": Field("float", 0.0, _nonneg, "must be >= 0 (0 means none)"),
    },
    "solver": {
        "gamma": Field("float", 0.75, lambda x: 0.5 < x < 1, "must lie in (1/2, 1)"),
        "u0": Field("float_or_list", 0.0),
        "step_tau": Field("float_or_auto", "auto"),
        "picard_tol": Field("float", 1e-8, _pos, "must be > 0"),
        "max_iters": Field("int", 200, _pos, "must be >= 1"),
    },
    "stability": {
        "levels": Field("list", [4.0, 8.0, 16.0, 32.0]),
        "reference": Field("float", 32.0, _nonneg, "must be >= 0 (0 means the unmollified drift)"),
        "u0_shifts": Field("list", []),
    },
    "sweep": {
        "command": Field("str", "regularity", choices=tuple(c for c in COMMANDS if c != "sweep")),
        "params": Field("table", {}),
        "workers": Field("int", 1, _pos, "must be >= 1"),
    },
    "output": {
        "dir": Field("str", ""),
        "figures": Field("bool", True),
        "paths_csv": Field("int", 1, _nonneg, "must be >= 0"),
    },
}


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _coerce(spec: Field, value: Any, path: str) -> Any:
    k = spec.kind
    if k == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif k == "float":
        if not _is_number(value):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise ConfigError(f"{path}: NaN is not allowed")
    elif k == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false, got {value!r}")
    elif k == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        if spec.choices is not None and value not in spec.choices:
            raise ConfigError(f"{path}: {value!r} is not one of {', '.join(spec.choices)}")
    elif k == "list":
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        value = copy.deepcopy(value)
    elif k == "table":
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a table, got {value!r}")
        value = copy.deepcopy(value)
    elif k == "float_or_auto":
        if value != "auto":
            if not _is_number(value) or not value > 0:
                raise ConfigError(f"{path}: expected a positive number or \"auto\", got {value!r}")
            value = float(value)
    elif k == "float_or_list":
        if _is_number(value):
            value = float(value)
        elif isinstance(value, list) and value and all(_is_number(v) for v in value):
            value = [float(v) for v in value]
        else:
            raise ConfigError(f"{path}: expected a number or a list of numbers, got {value!r}")
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"{path}: {value!r} {spec.hint}")
    return value


def _resolve_block(schema: dict, data: Any, prefix: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a table")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        where = f"{prefix}." if prefix else ""
        raise ConfigError(f"{where}{unknown[0]}: unknown field")
    out = {}
    for key, spec in schema.items():
        path = f"{prefix}.{key}" if prefix else key
        if isinstance(spec, dict):
            out[key] = _resolve_block(spec, data.get(key, {}), path)
        else:
            out[key] = _coerce(spec, data[key], path) if key in data else copy.deepcopy(spec.default)
    return out


def _check_lists(cfg: dict) -> None:
    def numbers(path: str, values, n: int | None = None) -> None:
        if not all(_is_number(v) for v in values):
            raise ConfigError(f"{path}: expected numbers")
        if n is not None and len(values) != n:
            raise ConfigError(f"{path}: expected {n} entries")

    for i, pair in enumerate(cfg["occupation"]["pairs"]):
        if not isinstance(pair, list):
            raise ConfigError(f"occupation.pairs[{i}]: expected [s, t]")
        numbers(f"occupation.pairs[{i}]", pair, 2)
    numbers("occupation.xi", cfg["occupation"]["xi"])
    numbers("occupation.local_time_window", cfg["occupation"]["local_time_window"], 2)
    numbers("young2d.corner", cfg["young2d"]["corner"], 2)
    numbers("stability.levels", cfg["stability"]["levels"])
    numbers("stability.u0_shifts", cfg["stability"]["u0_shifts"])
    levels = cfg["sewing"]["levels"]
    if not all(isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= 16 for v in levels):
        raise ConfigError("sewing.levels: expected integers in [0, 16]")
    if len(levels) < 4:
        raise ConfigError("sewing.levels: need at least 4 levels")
    for name in ("regularity", "density"):
        if cfg[name]["xi_min"] >= cfg[name]["xi_max"]:
            raise ConfigError(f"{name}.xi_max: must exceed {name}.xi_min")
    for key, values in cfg["sweep"]["params"].items():
        path = f"sweep.params.{key}"
        try:
            spec = get_path(SCHEMA, key)
        except KeyError:
            raise ConfigError(f"{path}: unknown parameter") from None
        if not isinstance(spec, Field) or spec.kind not in ("int", "float", "str", "bool"):
            raise ConfigError(f"{path}: only scalar fields can be swept")
        if key.split(".")[0] in ("sweep", "output") or key in ("command", "threads"):
            raise ConfigError(f"{path}: field cannot be swept")
        if not isinstance(values, list):
            raise ConfigError(f"{path}: expected a list of values")
        for j, v in enumerate(values):
            _coerce(spec, v, f"{path}[{j}]")


def resolve(data: dict) -> dict:
    """Expand defaults and validate a raw configuration mapping."""
    cfg = _resolve_block(SCHEMA, data, "")
    _check_lists(cfg)
    if not cfg["name"]:
        cfg["name"] = cfg["command"]
    return cfg


def get_path(tree: dict, dotted: str) -> Any:
    node = tree
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise KeyError(dotted)
        node = node[part]
    return node


def set_path(tree: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def config_hash(cfg: dict) -> str:
    """Short SHA-256 of the canonical JSON of the resolved config, runtime fields removed."""
    body = copy.deepcopy(cfg)
    for path in RUNTIME_ONLY:
        body.pop(path[0], None)
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def loads_config(text: str) -> dict:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: malformed TOML ({exc})") from None
    return resolve(raw)


def load_config(path: str | Path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {p} ({exc.strerror})") from None
    return loads_config(text)


def dumps_config(cfg: dict) -> str:
    return tomli_w.dumps(cfg)


@dataclass
class ExperimentConfig:
    """A resolved configuration with its hash."""

    data: dict

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls(load_config(path))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(resolve(data))

    @property
    def command(self) -> str:
        return self.data["command"]

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def with_overrides(self, overrides: dict[str, Any]) -> "ExperimentConfig":
        """Copy with dotted-path fields replaced, e.g. ``{"process.H": 0.3}``."""
        raw = copy.deepcopy(self.data)
        for key, value in overrides.items():
            set_path(raw, key, value)
        return ExperimentConfig(resolve(raw))

    def to_toml(self) -> str:
        return dumps_config(self.data)
