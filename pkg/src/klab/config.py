"""Run configuration: flat ``section.key = value`` text files.

Grammar, one entry per line::

    # comment
    section.key = value

Values are Python literals (numbers, strings, booleans, ``None``, tuples and
lists); a bare word that is not a literal is taken as a string.  Unknown
sections are rejected; keys under ``problem.`` and ``data.`` other than the
documented ones are passed to the family factories.
"""
from __future__ import annotations

import ast
import copy

from .errors import ConfigError

DEFAULTS = {
    "problem": {"family": "kirchhoff"},
    "data": {"family": None, "amplitude": 1.0, "l2_sq": 1e-3},
    "grid": {"n": 1, "rho_max": 10.0, "n_rho": 64, "sphere_res": None},
    "time": {"T": 2.0, "dt": 0.005, "two_sided": False},
    "solver": {"method": "both", "linear": "asymptotic", "amplitudes": "rk4",
               "backend": None, "seed": "constant"},
    "tolerances": {
        "fixed_point": 1e-10,
        "max_iters": 200,
        "gate_threshold": 1e-2,
        "tau_max": 200.0,
        "n_tau": 4001,
        "cfl": 1.0,
        "mismatch": 1e-6,
        "representation": 1e-6,
        "split_rtol": 1e-5,
        "diagonal_residue": 1e-10,
        "symbol_residual": 1e-8,
        "diag_residual": 1e-9,
        "inverse_residual": 1e-10,
        "det_floor": 1e-6,
        "hamiltonian": 1e-6,
        "tv_scaling": 0.2,
        "ratio_spread": 0.3,
        "uniqueness_factor": 10.0,
        "homogeneity": 1e-12,
        "tv_additivity": 1e-12,
    },
    "diagnostics": {"Lambda": None, "K": 1e-2, "lambdas": (0.5, 0.25, 0.125)},
    "outputs": {"dir": "out", "snapshots": (1.0,), "fields": True},
}

CHOICES = {
    ("solver", "method"): ("direct", "fixed_point", "both"),
    ("solver", "linear"): ("asymptotic", "modes"),
    ("solver", "amplitudes"): ("rk4", "picard"),
    ("solver", "seed"): ("constant", "ramp", "direct"),
    ("solver", "backend"): (None, "compiled", "python"),
}
OPEN_SECTIONS = ("problem", "data")


def parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_lines(lines, source="<config>"):
    entries = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, f"{source}:{no}: expected 'section.key = value'")
        key, val = line.split("=", 1)
        entries[key.strip()] = parse_value(val)
    return entries


class RunConfig:
    """Nested defaults plus validated overrides; ``cfg["grid.n_rho"]`` style access."""

    def __init__(self, entries=None):
        self.values = copy.deepcopy(DEFAULTS)
        for key, val in (entries or {}).items():
            self.set(key, val)
        self.validate()

    @classmethod
    def from_file(cls, path, overrides=()):
        with open(path) as fh:
            entries = parse_lines(fh, str(path))
        entries.update(parse_overrides(overrides))
        return cls(entries)

    @classmethod
    def from_overrides(cls, overrides=()):
        return cls(parse_overrides(overrides))

    def set(self, key, val):
        section, _, name = key.partition(".")
        if not name:
            raise ConfigError(key, f"key {key!r} must look like 'section.key'")
        if section not in self.values:
            raise ConfigError(key, f"unknown section {section!r}")
        if section not in OPEN_SECTIONS and name not in self.values[section]:
            raise ConfigError(key, f"unknown key {key!r}")
        self.values[section][name] = val

    def __getitem__(self, key):
        section, _, name = key.partition(".")
        return self.values[section][name]

    def section(self, name):
        return dict(self.values[name])

    def family_params(self, section):
        fixed = DEFAULTS[section]
        return {k: v for k, v in self.values[section].items() if k not in fixed}

    def validate(self):
        from .data import DATA_FAMILIES
        from .families import FAMILIES

        if self["problem.family"] not in FAMILIES:
            raise ConfigError("problem.family",
                              f"unknown problem family {self['problem.family']!r}; "
                              f"known: {', '.join(sorted(FAMILIES))}")
        dfam = self["data.family"]
        if dfam is not None and dfam not in DATA_FAMILIES:
            raise ConfigError("data.family", f"unknown data family {dfam!r}; "
                              f"known: {', '.join(sorted(DATA_FAMILIES))}")
        for (section, name), allowed in CHOICES.items():
            if self.values[section][name] not in allowed:
                raise ConfigError(f"{section}.{name}",
                                  f"{self.values[section][name]!r} not in {allowed}")
        if self["grid.n"] not in (1, 2, 3):
            raise ConfigError("grid.n", "dimension must be 1, 2 or 3")
        for key in ("grid.rho_max", "time.T", "time.dt"):
            if not isinstance(self[key], (int, float)) or self[key] <= 0:
                raise ConfigError(key, "must be a positive number")
        if not isinstance(self["grid.n_rho"], int) or self["grid.n_rho"] < 8 or self["grid.n_rho"] % 8:
            raise ConfigError("grid.n_rho", "must be a positive multiple of 8")
        for name, val in self.values["tolerances"].items():
            if not isinstance(val, (int, float)) or val <= 0:
                raise ConfigError(f"tolerances.{name}", "tolerances must be positive numbers")
        amp = self["data.amplitude"]
        if not isinstance(amp, (int, float)) or amp < 0:
            raise ConfigError("data.amplitude", "must be a non-negative number")

    def as_dict(self):
        return copy.deepcopy(self.values)

    def __repr__(self):
        return f"RunConfig({self.values!r})"


def parse_overrides(overrides):
    entries = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(None, f"override {item!r} must look like section.key=value")
        key, val = item.split("=", 1)
        entries[key.strip()] = parse_value(val)
    return entries
