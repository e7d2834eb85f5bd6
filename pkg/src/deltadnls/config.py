"""Experiment configuration: ``key = value`` files with one section per subcommand.

Example::

    [ground-state]
    mode = m2
    d = 1
    gamma = 1
    sigma = 2
    v0 = 0
    nu = 3

Model keys (``d``, ``gamma``, ``sigma``, ``v0`` and the subcommand's target
quantity) have no default and must be given.  Numerical keys default to the
values in :data:`SCHEMA`.  Unknown sections and keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DNLSError

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMA", "SUBCOMMANDS", "load_config"]


class ConfigError(DNLSError):
    """Invalid, missing or unknown configuration key."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)


REQUIRED = object()


def _float(s: str) -> float:
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan")
    return v


def _int(s: str) -> int:
    f = float(s)
    if not f.is_integer():
        raise ValueError("not an integer")
    return int(f)


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def _float_list(s: str) -> list[float]:
    return [_float(x) for x in s.split(",") if x.strip()]


def _int_list(s: str) -> list[int]:
    return [_int(x) for x in s.split(",") if x.strip()]


def _choice(*opts):
    def parse(s: str) -> str:
        t = s.strip()
        if t not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return t
    return parse


def _optional(parser):
    def parse(s: str):
        return None if s.strip().lower() in ("", "none", "auto") else parser(s)
    return parse


_MODEL = {"d": (_int, REQUIRED), "gamma": (_float, REQUIRED), "sigma": (_float, REQUIRED),
          "v0": (_float, REQUIRED)}

SCHEMA: dict[str, dict[str, tuple]] = {
    "modes": {
        "d": (_int_list, REQUIRED),
        "v0": (_float_list, REQUIRED),
        "radius": (_optional(_int), None),
    },
    "ground-state": {
        **_MODEL,
        "mode": (_choice("m1", "m2"), "m1"),
        "omega": (_optional(_float), None),
        "nu": (_optional(_float), None),
        "radius": (_int, 30),
        "tol": (_float, 1e-10),
        "step": (_float, 0.1),
        "max_iter": (_int, 100_000),
        "snapshot": (_bool, False),
    },
    "threshold-scan": {
        **_MODEL,
        "nu": (_float, REQUIRED),
        "grid": (_int, 1000),
        "branch": (_choice("breather", "staggering"), "breather"),
        "kinetic": (_choice("lattice", "binomial"), "lattice"),
    },
    "evolve": {
        **_MODEL,
        "init": (_choice("random", "delta", "mode"), "random"),
        "nu": (_float, 1.0),
        "radius": (_int, 64),
        "T": (_float, 10.0),
        "dt": (_float, 0.01),
        "sample_every": (_int, 10),
        "seed": (_int, 0),
    },
    "scatter": {
        **_MODEL,
        "nu": (_float, REQUIRED),
        "p": (_float, REQUIRED),
        "radius": (_int, 1012),
        "T": (_float, 400.0),
        "dt": (_float, 0.01),
        "t_min": (_optional(_float), None),
        "t_max": (_optional(_float), None),
        "sample_every": (_int, 10),
        "enforce": (_bool, True),
    },
    "persist": {
        **_MODEL,
        "eps": (_float, REQUIRED),
        "cT": (_float, 1.0),
        "radius": (_optional(_int), None),
        "dt": (_float, 0.01),
        "sample_every": (_int, 10),
    },
}

SUBCOMMANDS = tuple(SCHEMA)


@dataclass
class ExperimentConfig:
    subcommand: str
    values: dict = field(default_factory=dict)
    output_dir: Path = Path("dnls-output")

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


def _read_file(path: str | Path, subcommand: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case-sensitive (T vs t)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", sec)
    if cp.defaults():
        key = next(iter(cp.defaults()))
        raise ConfigError(f"key {key!r} outside any section", key)
    return dict(cp.items(subcommand)) if cp.has_section(subcommand) else {}


def load_config(subcommand: str, path: str | Path | None = None, overrides: dict[str, str] | None = None,
                output_dir: str | Path | None = None) -> ExperimentConfig:
    """Merge file values and overrides, check them against the schema, fill defaults."""
    if subcommand not in SCHEMA:
        raise ConfigError(f"unknown subcommand {subcommand!r}", subcommand)
    schema = SCHEMA[subcommand]
    raw: dict[str, str] = {}
    if path is not None:
        raw.update(_read_file(path, subcommand))
    raw.update(overrides or {})
    for key in raw:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for {subcommand}", key)
    values = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                values[key] = parse(str(raw[key]))
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key!r}: {raw[key]!r} ({exc})", key) from exc
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r}", key)
        else:
            values[key] = default
    if subcommand == "ground-state":
        need = "omega" if values["mode"] == "m1" else "nu"
        if values[need] is None:
            raise ConfigError(f"missing required key {need!r} for mode {values['mode']}", need)
    return ExperimentConfig(subcommand, values, Path(output_dir) if output_dir else Path("dnls-output"))
