"""Flat ``key = value`` run configuration with per-command schemas."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

REQUIRED = object()

COMMANDS = ("spectrum", "bdg", "evolve", "separatrix", "stationary", "lab-rate")
MODELS = ("two_mode", "extended")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text: str):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _model(text: str) -> str:
    if text not in MODELS:
        raise ValueError(f"must be one of {', '.join(MODELS)}")
    return text


def _fmt(text: str) -> str:
    if text not in ("csv", "json"):
        raise ValueError("must be csv or json")
    return text


# key -> (parser, default); REQUIRED marks mandatory keys
_GRID = {"x_min": (float, -10.0), "x_max": (float, 10.0), "n": (int, 512)}
_TWO = {"a_R": (float, 0.0), "a_I": (float, 0.0), "U": (float, 0.0)}
_EXT = {"a_R": (float, 0.0), "a_I": (float, 0.0), "g": (float, 0.0), **_GRID}
_SWEEP = {"gamma_min": (float, REQUIRED), "gamma_max": (float, REQUIRED), "steps": (int, REQUIRED),
          "descending": (_bool, False)}
_TRACE = {"norm_step": (float, 0.05), "norm_max": (float, 2.2)}
_COMMON = {"model": (_model, REQUIRED), "format": (_fmt, "csv")}

SCHEMAS: Dict[tuple, Dict[str, tuple]] = {
    ("spectrum", "two_mode"): {**_COMMON, **_TWO, **_SWEEP, "norm": (float, 1.0)},
    ("spectrum", "extended"): {**_COMMON, **_EXT, **_SWEEP, **_TRACE},
    ("bdg", "two_mode"): {**_COMMON, **_TWO, **_SWEEP, "norm": (float, 1.0), "branch": (str, "s0")},
    ("bdg", "extended"): {**_COMMON, **_EXT, **_SWEEP, **_TRACE, "branch": (str, "lower"),
                          "modes": (str, "smallest4")},
    ("evolve", "two_mode"): {**_COMMON, **_TWO, "gamma": (float, REQUIRED), "R": (float, REQUIRED),
                             "theta": (float, REQUIRED), "phi": (float, REQUIRED),
                             "t_final": (float, REQUIRED), "dt": (float, 1e-3), "stride": (int, 1),
                             "norm_cap": (float, 0.0)},
    ("evolve", "extended"): {**_COMMON, **_EXT, **_TRACE, "gamma": (float, 0.0), "target_norm": (float, 0.0),
                             "initial_norm": (float, 0.0), "initial_file": (str, ""),
                             "t_final": (float, REQUIRED), "dt": (float, 5e-3), "stride": (int, 200),
                             "snapshot_stride": (int, 0)},
    ("separatrix", "two_mode"): {**_COMMON, **_TWO, "gamma": (float, REQUIRED), "radii": (_float_list, ()),
                                 "onset_search": (_bool, False), "coarse_step": (float, 0.1),
                                 "fine_step": (float, 0.01), "r_max": (float, 2.0),
                                 "n_theta": (int, 48), "n_phi": (int, 96), "t_max": (float, 200.0),
                                 "dt": (float, 1e-3), "eps_conv": (float, 1e-3), "dwell": (float, 5.0),
                                 "norm_cap": (float, 10.0), "attractor": (str, "auto")},
    ("stationary", "two_mode"): {**_COMMON, **_TWO, "gamma": (float, REQUIRED)},
    ("stationary", "extended"): {**_COMMON, **_EXT, **_TRACE, "gamma": (float, 0.0),
                                 "target_norm": (float, 0.0), "branch": (str, "lower")},
    ("lab-rate", None): {"gamma": (float, REQUIRED), "tau": (float, 0.030), "format": (_fmt, "csv")},
}

_POSITIVE = {"steps", "n", "dt", "stride", "t_final", "norm", "norm_step", "norm_max", "n_theta", "n_phi",
             "t_max", "eps_conv", "dwell", "norm_cap", "tau", "coarse_step", "fine_step", "r_max"}
# zero means "unset" for these
_ZERO_OK = {"norm_cap", "snapshot_stride"}


@dataclass
class RunConfig:
    command: str
    values: Dict[str, Any]
    source: Optional[str] = None
    model: Optional[str] = field(default=None)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def format(self) -> str:
        return self.values.get("format", "csv")

    def resolved(self) -> Dict[str, Any]:
        """Config as plain JSON-able values, keys sorted."""
        out = {}
        for k in sorted(self.values):
            v = self.values[k]
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


def parse_pairs(text: str, origin: str = "<config>") -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: malformed line (expected 'key = value'): {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{origin}:{lineno}: empty key or value")
        if key in pairs:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def build_config(command: str, pairs: Dict[str, str], source: Optional[str] = None) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    model = None
    if command != "lab-rate":
        if "model" not in pairs:
            raise ConfigError("missing required keys: model")
        try:
            model = _model(pairs["model"])
        except ValueError as exc:
            raise ConfigError(f"key 'model': {exc}") from None
        if (command, model) not in SCHEMAS:
            raise ConfigError(f"command {command!r} does not support model {model!r}")
    schema = SCHEMAS[(command, model)]
    unknown = sorted(set(pairs) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {command}/{model or '-'}: {', '.join(unknown)}")
    missing = sorted(k for k, (_, d) in schema.items() if d is REQUIRED and k not in pairs)
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    values: Dict[str, Any] = {}
    for key, (parser, default) in schema.items():
        if key in pairs:
            try:
                values[key] = parser(pairs[key])
            except ValueError as exc:
                raise ConfigError(f"key {key!r}: cannot parse {pairs[key]!r} ({exc})") from None
        else:
            values[key] = default
    _validate(command, model, values)
    return RunConfig(command, values, source, model)


def _validate(command, model, v):
    for key, val in v.items():
        if isinstance(val, float) and not math.isfinite(val):
            raise ConfigError(f"key {key!r} must be finite")
        if key in _POSITIVE and not (val > 0 or (key in _ZERO_OK and val == 0)):
            raise ConfigError(f"key {key!r} must be positive")
    if "gamma_min" in v:
        if not v["gamma_min"] < v["gamma_max"]:
            raise ConfigError("empty gamma range: need gamma_min < gamma_max")
        if v["gamma_min"] < 0:
            raise ConfigError("gamma_min must be >= 0")
        if v["steps"] < 2:
            raise ConfigError("steps must be >= 2")
    if "gamma" in v and v["gamma"] < 0:
        raise ConfigError("gamma must be >= 0")
    if v.get("snapshot_stride", 0) < 0:
        raise ConfigError("snapshot_stride must be >= 0")
    if model == "extended":
        if not v["a_I"] > -0.12:
            raise ConfigError("a_I must exceed -0.12")
        n = v["n"]
        if n < 64 or n & (n - 1):
            raise ConfigError("n must be a power of two >= 64")
        if not v["x_min"] < v["x_max"]:
            raise ConfigError("need x_min < x_max")
    if model == "two_mode" and "a_I" in v and not abs(v["a_I"]) < 1:
        raise ConfigError("|a_I| must be < 1")
    if command in ("evolve", "stationary") and model == "extended":
        if (v["gamma"] > 0) == (v["target_norm"] > 0):
            raise ConfigError("set exactly one of gamma, target_norm")
    if command == "evolve" and model == "extended":
        if (v["initial_norm"] > 0) == bool(v["initial_file"]):
            raise ConfigError("set exactly one of initial_norm, initial_file")
    if command == "bdg" and model == "extended" and v["modes"] not in ("smallest4", "all"):
        raise ConfigError("modes must be smallest4 or all")
    if command == "stationary" and model == "extended" and v["branch"] not in ("lower", "upper"):
        raise ConfigError("branch must be lower or upper")
    if command == "separatrix":
        if bool(v["radii"]) == v["onset_search"]:
            raise ConfigError("set exactly one of radii, onset_search = true")
        if any(r <= 0 for r in v["radii"]):
            raise ConfigError("radii must be positive")
        if v["attractor"] not in ("auto", "none"):
            raise ConfigError("attractor must be auto or none")


def read_config(path, command: str) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(command, parse_pairs(text, str(p)), str(p))
