"""Run configuration: an INI file with flat sections, validated against a fixed schema.

Example::

    [problem]
    name = p3_quasilinear
    eps = 1.0

    [study]
    mode = uniform
    levels = 4

Every section and key is optional except ``problem.name``.  Keys of the
``problem`` and ``goal`` sections other than ``name`` are forwarded to the
catalog factory and must match its parameters.
"""

from __future__ import annotations

import configparser
import inspect
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .problems import GOALS, PROBLEMS
from .schemes import SCHEME_NAMES

MODES = ("uniform", "adaptive", "verify")

# section -> key -> (type, default)
SCHEMA = {
    "discretization": {
        "dual": (str, "voronoi"),
        "scheme": (str, "exponential"),
        "scheme_m": (float, None),
        "assembly": (str, "fv"),
        "dual_method": (str, "galerkin"),
        "recovery": (str, "p2"),
        "quad_degree": (int, 5),
    },
    "mesh": {
        "n": (int, 8),
        "file": (str, None),
    },
    "study": {
        "mode": (str, "uniform"),
        "levels": (int, 4),
        "reference_degree": (int, 12),
    },
    "adaptive": {
        "max_cycles": (int, 5),
        "tol": (float, 0.0),
        "theta": (float, 0.5),
        "fallback": (str, "donald"),
    },
    "solver": {
        "atol": (float, 1e-10),
        "rtol": (float, 1e-12),
        "max_iter": (int, 50),
        "damping": (bool, True),
    },
    "output": {
        "dir": (str, "output"),
        "vtk": (bool, True),
        "plots": (bool, True),
        "dump_dual": (bool, False),
    },
    "verify": {
        "seed": (int, 0),
        "levels": (str, "8,16"),
    },
}

CHOICES = {
    ("discretization", "dual"): ("voronoi", "donald"),
    ("discretization", "scheme"): SCHEME_NAMES,
    ("discretization", "assembly"): ("fv", "galerkin"),
    ("discretization", "dual_method"): ("galerkin", "fv"),
    ("discretization", "recovery"): ("p2", "patch"),
    ("discretization", "quad_degree"): (2, 5),
    ("study", "mode"): MODES,
    ("adaptive", "fallback"): ("donald", "stop"),
}


@dataclass
class RunConfig:
    problem: str
    problem_params: dict = field(default_factory=dict)
    goal: str = "mean_value"
    goal_params: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    source: str | None = None

    def get(self, section, key):
        return self.sections[section][key]

    def __getitem__(self, dotted):
        section, key = dotted.split(".", 1)
        return self.get(section, key)


def _convert(kind, raw, path):
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            val = float(text)
            if math.isnan(val):
                raise ValueError(text)
            return val
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {raw!r}", path) from None
    return text


def _factory_params(factory, section, items):
    sig = inspect.signature(factory).parameters
    out = {}
    for key, raw in items.items():
        path = f"{section}.{key}"
        if key not in sig:
            raise ConfigError(f"unknown key; allowed: {sorted(sig)}", path)
        default = sig[key].default
        if isinstance(default, str):
            out[key] = raw.strip()
        elif raw.strip().lower() in ("none", ""):
            out[key] = None
        else:
            out[key] = _convert(float, raw, path)
    return out


def _check(section, key, value):
    allowed = CHOICES.get((section, key))
    if allowed is not None and value is not None and value not in allowed:
        raise ConfigError(f"must be one of {list(allowed)}, got {value!r}", f"{section}.{key}")
    path = f"{section}.{key}"
    if key in ("levels", "max_cycles", "max_iter", "n") and isinstance(value, int) and value < 1:
        raise ConfigError("must be >= 1", path)
    if key == "theta" and not 0.0 < value <= 1.0:
        raise ConfigError("must lie in (0, 1]", path)
    if key in ("atol", "rtol", "tol") and value < 0:
        raise ConfigError("must be nonnegative", path)


def build_config(data: dict, source=None) -> RunConfig:
    """Validate a nested mapping section -> key -> string value."""
    data = {s.lower(): {k.lower(): v for k, v in kv.items()} for s, kv in data.items()}
    for section in data:
        if section not in SCHEMA and section not in ("problem", "goal"):
            raise ConfigError("unknown section", section)
    prob = dict(data.get("problem", {}))
    if "name" not in prob:
        raise ConfigError("missing required key", "problem.name")
    pname = prob.pop("name").strip()
    if pname not in PROBLEMS:
        raise ConfigError(f"unknown problem {pname!r}; choose from {sorted(PROBLEMS)}", "problem.name")
    goal = dict(data.get("goal", {}))
    gname = goal.pop("name", "mean_value").strip()
    if gname not in GOALS:
        raise ConfigError(f"unknown goal {gname!r}; choose from {sorted(GOALS)}", "goal.name")
    cfg = RunConfig(
        problem=pname,
        problem_params=_factory_params(PROBLEMS[pname], "problem", prob),
        goal=gname,
        goal_params=_factory_params(GOALS[gname], "goal", goal),
        source=None if source is None else str(source),
    )
    for section, keys in SCHEMA.items():
        given = data.get(section, {})
        for key in given:
            if key not in keys:
                raise ConfigError(f"unknown key; allowed: {sorted(keys)}", f"{section}.{key}")
        values = {}
        for key, (kind, default) in keys.items():
            if key in given and given[key].strip().lower() not in ("", "none"):
                values[key] = _convert(kind, given[key], f"{section}.{key}")
            else:
                values[key] = default
            _check(section, key, values[key])
        cfg.sections[section] = values
    return cfg


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    """Read an INI file; ``overrides`` ("section.key" -> string) take precedence over it."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str.lower
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {str(p)!r} not found")
        try:
            parser.read(p, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from None
    data = {s: dict(parser.items(s)) for s in parser.sections()}
    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError("override must look like section.key=value", dotted)
        section, key = dotted.split(".", 1)
        data.setdefault(section.lower(), {})[key.lower()] = str(value)
    return build_config(data, path)


def build_objects(cfg: RunConfig):
    """Instantiate (problem, goal) from the catalog."""
    from .problems import get_goal, get_problem

    return get_problem(cfg.problem, **cfg.problem_params), get_goal(cfg.goal, **cfg.goal_params)


def run_settings(cfg: RunConfig):
    from .newton import SolverOptions
    from .pipeline import RunSettings
    from .schemes import UpwindScheme

    d = cfg.sections["discretization"]
    s = cfg.sections["solver"]
    try:
        scheme = UpwindScheme(d["scheme"], d["scheme_m"])
    except ValueError as exc:
        raise ConfigError(str(exc), "discretization.scheme_m") from None
    return RunSettings(
        dual_kind=d["dual"],
        scheme=scheme,
        mode=d["assembly"],
        dual_method=d["dual_method"],
        recovery=d["recovery"],
        quad_degree=d["quad_degree"],
        reference_degree=cfg.sections["study"]["reference_degree"],
        solver=SolverOptions(atol=s["atol"], rtol=s["rtol"], max_iter=s["max_iter"], damping=s["damping"]),
    )


def adaptive_options(cfg: RunConfig):
    from .adaptivity import AdaptiveOptions

    a = cfg.sections["adaptive"]
    return AdaptiveOptions(max_cycles=a["max_cycles"], tol=a["tol"], theta=a["theta"], fallback=a["fallback"])
