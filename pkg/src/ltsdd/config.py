"""INI run configuration.

Example::

    [run]
    case = test1            ; test1 | test2 | test2-time | test3 | custom
    method = gtp-schur-nn   ; monodomain | gtp-schur | gtp-schur-nn | gto-schwarz | oswr-jacobi
    tol = 1e-6
    robin = optimized       ; or "a12, a21"

    [mesh]
    n = 20

    [time]
    T = 0.1
    steps = 80, 60          ; one count per subdomain

Custom cases describe the mesh, the boxes and the zones explicitly; see
``README.md``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError

METHODS = ("monodomain", "gtp-schur", "gtp-schur-nn", "gto-schwarz", "oswr-jacobi")
CASES = ("test1", "test2", "test2-time", "test3", "custom")


@dataclass
class RunConfig:
    case: str = "test1"
    method: str = "gtp-schur-nn"
    tol: float = 1e-6
    max_iter: int = 500
    robin: object = "optimized"  # "optimized" or (a12, a21)
    master: int = 0
    normalize_weights: bool = False
    windows: int = 1
    seed: Optional[int] = None
    random_guess: bool = False
    snapshots: list = field(default_factory=list)
    # mesh / time
    n: int = 20
    T: float = 0.1
    steps: list = field(default_factory=lambda: [80, 60])
    # test 2
    problem: str = "c"
    with_data: bool = False
    grid: int = 1
    level: int = 0
    # study / sweep
    levels: list = field(default_factory=list)
    sweep_alpha12: list = field(default_factory=list)
    sweep_alpha21: list = field(default_factory=list)
    sweep_iterations: int = 25
    # custom case sections, raw
    custom: dict = field(default_factory=dict)
    source: str = ""

    def resolved(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "custom"}
        out["custom"] = {k: dict(v) for k, v in self.custom.items()}
        return out


def _floats(text: str, where: str) -> list:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(where, f"expected a list of numbers, got {text!r}") from exc


def _ints(text: str, where: str) -> list:
    vals = _floats(text, where)
    if any(v != int(v) for v in vals):
        raise ConfigError(where, f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _get(cp, section, key, conv, default, path):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    where = f"{path}:[{section}].{key}"
    try:
        return conv(raw, where)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(where, f"cannot parse {raw!r}: {exc}") from exc


def _num(conv):
    return lambda raw, where: conv(raw.strip())


def _bool(raw, where):
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(where, f"expected a boolean, got {raw!r}")


def parse_config(text: str, path: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(path, str(exc)) from exc
    if not cp.has_section("run"):
        raise ConfigError(f"{path}:[run]", "missing section")
    cfg = RunConfig(source=text)
    cfg.case = cp.get("run", "case", fallback=cfg.case).strip().lower()
    if cfg.case not in CASES:
        raise ConfigError(f"{path}:[run].case", f"unknown case {cfg.case!r}; expected one of {CASES}")
    cfg.method = cp.get("run", "method", fallback=cfg.method).strip().lower()
    if cfg.method not in METHODS:
        raise ConfigError(f"{path}:[run].method", f"unknown method {cfg.method!r}; expected one of {METHODS}")
    cfg.tol = _get(cp, "run", "tol", _num(float), cfg.tol, path)
    if not cfg.tol > 0:
        raise ConfigError(f"{path}:[run].tol", "must be positive")
    cfg.max_iter = _get(cp, "run", "max_iter", _num(int), cfg.max_iter, path)
    cfg.master = _get(cp, "run", "master", _num(int), cfg.master, path)
    cfg.windows = _get(cp, "run", "windows", _num(int), cfg.windows, path)
    if cfg.windows < 1:
        raise ConfigError(f"{path}:[run].windows", "must be at least 1")
    cfg.seed = _get(cp, "run", "seed", _num(int), cfg.seed, path)
    cfg.normalize_weights = _get(cp, "run", "normalize_weights", _bool, cfg.normalize_weights, path)
    cfg.random_guess = _get(cp, "run", "random_guess", _bool, cfg.random_guess, path)
    cfg.snapshots = _get(cp, "run", "snapshots", _floats, cfg.snapshots, path)
    robin = cp.get("run", "robin", fallback="optimized").strip().lower()
    if robin != "optimized":
        vals = _floats(robin, f"{path}:[run].robin")
        if len(vals) not in (1, 2) or min(vals) <= 0:
            raise ConfigError(f"{path}:[run].robin", "expected 'optimized' or one or two positive numbers")
        cfg.robin = tuple(vals) if len(vals) == 2 else (vals[0], vals[0])

    cfg.n = _get(cp, "mesh", "n", _num(int), cfg.n, path)
    cfg.T = _get(cp, "time", "T", _num(float), cfg.T, path)
    cfg.steps = _get(cp, "time", "steps", _ints, cfg.steps, path)
    if cfg.T <= 0 or any(s < 1 for s in cfg.steps):
        raise ConfigError(f"{path}:[time]", "T and step counts must be positive")

    cfg.problem = cp.get("test2", "problem", fallback=cfg.problem).strip().lower()
    if cfg.problem not in ("a", "b", "c"):
        raise ConfigError(f"{path}:[test2].problem", f"expected a, b or c, got {cfg.problem!r}")
    cfg.with_data = _get(cp, "test2", "with_data", _bool, cfg.with_data, path)
    cfg.grid = _get(cp, "test2", "grid", _num(int), cfg.grid, path)
    if cfg.grid not in (1, 2, 3, 4):
        raise ConfigError(f"{path}:[test2].grid", "expected 1..4")
    cfg.level = _get(cp, "test2", "level", _num(int), cfg.level, path)

    cfg.levels = _get(cp, "study", "levels", _ints, cfg.levels, path)
    cfg.sweep_alpha12 = _get(cp, "sweep", "alpha12", _floats, cfg.sweep_alpha12, path)
    cfg.sweep_alpha21 = _get(cp, "sweep", "alpha21", _floats, cfg.sweep_alpha21, path)
    cfg.sweep_iterations = _get(cp, "sweep", "iterations", _num(int), cfg.sweep_iterations, path)

    if cfg.case == "custom":
        for sec in ("mesh", "boxes"):
            if not cp.has_section(sec):
                raise ConfigError(f"{path}:[{sec}]", "required for custom cases")
        zones = [s for s in cp.sections() if s.startswith("zone.")]
        if not zones:
            raise ConfigError(f"{path}:[zone.*]", "custom cases need at least one zone section")
        cfg.custom = {s: dict(cp.items(s)) for s in ["mesh", "boxes"] + zones}
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(p), f"cannot read: {exc.strerror}") from exc
    return parse_config(text, str(p))
