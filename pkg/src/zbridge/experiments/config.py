"""Key-value scenario configuration.

A config file is a list of ``key = value`` lines (``#`` starts a comment).
Every scenario carries its full table of defaults; a key that is not in the
table is rejected by name.  Density and model parameters are passed as
``param.<name>`` and checked against the factory signature.
"""

from __future__ import annotations

import configparser
import hashlib
import inspect
from dataclasses import dataclass, field

__all__ = ["ConfigError", "ScenarioConfig", "parse_value", "load_config", "DEFAULTS", "PARAM_FACTORIES"]

_SECTION = "scenario"


class ConfigError(ValueError):
    """Bad scenario name, unknown key or unparsable value."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


_COMMON = {"seed": 20240601}

DEFAULTS = {
    "gaussian-path": {
        "density": "gaussian-pair",
        "M": 10,
        "N_list": (1000, 4000),
        "h": "identity",
        "sampler": "exact",
        "replicates": 200,
        "grid_points": 101,
    },
    "error-surface": {
        "density": "gaussian-pair",
        "M_list": (5, 10, 20),
        "N_list": (500, 1000, 2000),
        "h": "identity",
        "sampler": "exact",
        "replicates": 100,
    },
    "rejection-demo": {
        "density": "bimodal-vs-student-t",
        "N0": 1000,
        "M_list": (5, 10),
        "h_list": ("power:0.5", "power:2"),
        "replicates": 100,
        "psi_points": 401,
        "psi_lo": -4.0,
        "psi_hi": 4.0,
    },
    "zs-boxplot": {
        "density": "bimodal-vs-student-t",
        "N0": 1000,
        "M_list": (5, 10),
        "h_list": ("power:0.5", "power:2"),
        "replicates": 100,
    },
    "evidence-rayleigh": {
        "y": 0.65,
        "R": 0.25,
        "Q": 0.2,
        "M": 10,
        "N_list": (50, 10000),
        "anchorings": ("prior", "likelihood", "auxiliary"),
        "h": "identity",
        "sampler": "metropolis",
        "burn_in": 300,
        "replicates": 1,
    },
    "kitagawa-filter": {
        "model": "kitagawa",
        "T": 50,
        "n_list": (5, 10),
        "M": 10,
        "N": 500,
        "h": "identity",
        "burn_in": 100,
        "inflation": 1.0,
        "grid_sigmas": 8.0,
        "raster_points": 400,
    },
}

# name of the key that selects the factory whose keyword arguments ``param.*`` may set
PARAM_FACTORIES = {
    "gaussian-path": "density",
    "error-surface": "density",
    "rejection-demo": "density",
    "zs-boxplot": "density",
    "kitagawa-filter": "model",
}


def _factories(kind):
    if kind == "density":
        from ..density import _BUILTINS

        return _BUILTINS
    from ..filter import MODELS

    return MODELS


def parse_value(raw: str, like):
    """Coerce ``raw`` to the type of the default ``like``."""
    raw = raw.strip()
    if isinstance(like, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, tuple):
        items = [p.strip() for p in raw.split(",") if p.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(parse_value(p, like[0]) for p in items)
    return raw


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    values: dict
    params: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def lines(self):
        out = [f"{k} = {_fmt(v)}" for k, v in sorted(self.values.items())]
        out += [f"param.{k} = {_fmt(v)}" for k, v in sorted(self.params.items())]
        return out

    def dump(self) -> str:
        return f"# scenario = {self.scenario}\n" + "\n".join(self.lines()) + "\n"

    @property
    def hash(self) -> str:
        text = self.scenario + "\n" + "\n".join(self.lines())
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _coerce_default(v):
    # factory defaults may be ints where floats are meant
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, tuple):
        return tuple(_coerce_default(x) for x in v)
    return v


def _param_defaults(scenario, values):
    kind = PARAM_FACTORIES.get(scenario)
    if kind is None:
        return None
    name = values[kind]
    table = _factories(kind)
    if name not in table:
        raise ConfigError(f"unknown {kind} {name!r}; choose from {sorted(table)}", kind)
    sig = inspect.signature(table[name])
    return {k: p.default for k, p in sig.parameters.items() if p.default is not inspect.Parameter.empty}


def load_config(scenario: str, path=None, overrides=(), seed=None) -> ScenarioConfig:
    """Build a config from defaults, an optional file, ``key=value`` overrides and a seed."""
    if scenario not in DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(DEFAULTS)}", "scenario")
    table = dict(_COMMON, **DEFAULTS[scenario])
    raw = {}
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#",))
        cp.optionxform = str
        with open(path) as fh:
            text = fh.read()
        try:
            cp.read_string(f"[{_SECTION}]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        raw.update(cp[_SECTION])
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        raw[k.strip()] = v
    if seed is not None:
        raw["seed"] = str(seed)

    values = dict(table)
    param_raw = {}
    for k, v in raw.items():
        if k.startswith("param."):
            param_raw[k[len("param."):]] = v
            continue
        if k not in table:
            raise ConfigError(f"unknown key {k!r} for scenario {scenario!r}", k)
        try:
            values[k] = parse_value(v, table[k])
        except ValueError as exc:
            raise ConfigError(f"bad value for {k!r}: {exc}", k) from None
    if not 0 <= values["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed")

    pdefs = _param_defaults(scenario, values)
    params = {} if pdefs is None else {k: _coerce_default(v) for k, v in pdefs.items()}
    if param_raw and pdefs is None:
        raise ConfigError(f"scenario {scenario!r} takes no param.* keys", "param." + next(iter(param_raw)))
    for k, v in param_raw.items():
        if k not in pdefs:
            raise ConfigError(f"unknown key 'param.{k}' (valid: {sorted(pdefs)})", "param." + k)
        try:
            params[k] = parse_value(v, params[k])
        except ValueError as exc:
            raise ConfigError(f"bad value for 'param.{k}': {exc}", "param." + k) from None
    return ScenarioConfig(scenario, values, params)
