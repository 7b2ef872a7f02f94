"""Run configuration: dataclasses plus an INI-style reader.

Example::

    [run]
    horizon = 1.0
    solver = lines

    [grid]
    n = 256

    [params]
    eps = 0.01

Only ``grid.n``, ``params.eps`` and ``run.horizon`` are required.  List
values are comma separated.  ``--set key=value`` overrides use dotted keys
(``params.eps=0``); ``horizon``, ``solver``, ``seed`` and ``output`` may
be given without the ``run.`` prefix.
"""
from __future__ import annotations

import configparser
import logging
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import get_type_hints

from .errors import ConfigError, ConfigTypeError, MissingKey, UnknownKey

log = logging.getLogger(__name__)

_REQUIRED = object()


@dataclass
class GridConfig:
    n: int = _REQUIRED  # type: ignore[assignment]
    length: float = 2 * math.pi * 10


@dataclass
class ParamsConfig:
    eps: float = _REQUIRED  # type: ignore[assignment]
    g: float = 9.81
    h_bar: float = 1.0


@dataclass
class CoriolisConfig:
    profile: str = "constant"  # constant | sine
    f0: float = 1.0
    f1: float = 0.0


@dataclass
class InitialConfig:
    kind: str = "gaussian_bump"  # gaussian_bump | sine | two_bump
    amplitude: float = 0.05
    width: float = math.pi
    modes: int = 1


@dataclass
class StepConfig:
    cfl: float = 0.4
    dt_max: float = math.inf
    sample_every: int = 1


@dataclass
class MildConfig:
    c_w: float = 0.5
    nodes: int = 32
    tol: float = 1e-10
    max_iter: int = 60
    n_ceiling: float = 1e6


@dataclass
class StudyConfig:
    eps_list: list = field(default_factory=lambda: [4e-3, 2e-3, 1e-3, 5e-4])
    eps_ref: float = 2.5e-4
    delta_list: list = field(default_factory=lambda: [1e-3])
    amplitude_list: list = field(default_factory=lambda: [0.1, 0.2, 0.4])
    a_large: float = 0.5
    samples: int = 40


@dataclass
class RunSection:
    horizon: float = _REQUIRED  # type: ignore[assignment]
    solver: str = "lines"  # lines | mild
    seed: int = 0
    output: str = "out"


SECTIONS = {
    "run": RunSection,
    "grid": GridConfig,
    "params": ParamsConfig,
    "coriolis": CoriolisConfig,
    "initial": InitialConfig,
    "step": StepConfig,
    "mild": MildConfig,
    "study": StudyConfig,
}
_RUN_SHORTCUTS = {f.name for f in fields(RunSection)}


@dataclass
class RunConfig:
    grid: GridConfig
    params: ParamsConfig
    run: RunSection
    coriolis: CoriolisConfig = field(default_factory=CoriolisConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    step: StepConfig = field(default_factory=StepConfig)
    mild: MildConfig = field(default_factory=MildConfig)
    study: StudyConfig = field(default_factory=StudyConfig)

    @property
    def horizon(self) -> float:
        return self.run.horizon

    @property
    def solver(self) -> str:
        return self.run.solver

    @property
    def seed(self) -> int:
        return self.run.seed

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**{name: SECTIONS[name](**d.get(name, {})) for name in SECTIONS})

    def replace(self, **dotted) -> "RunConfig":
        """Copy with dotted-key overrides, e.g. ``cfg.replace(**{"params.eps": 0.0})``."""
        d = self.to_dict()
        for key, value in dotted.items():
            sec, name = _split_key(key)
            d[sec][name] = value
        out = RunConfig.from_dict(d)
        validate(out)
        return out


def default_config(n: int = 256, eps: float = 0.01, horizon: float = 1.0) -> RunConfig:
    cfg = RunConfig(grid=GridConfig(n=n), params=ParamsConfig(eps=eps), run=RunSection(horizon=horizon))
    validate(cfg)
    return cfg


def _split_key(key: str) -> tuple[str, str]:
    if "." not in key:
        if key in _RUN_SHORTCUTS:
            return "run", key
        raise UnknownKey(f"unknown key {key!r}")
    sec, name = key.split(".", 1)
    if sec not in SECTIONS or name not in {f.name for f in fields(SECTIONS[sec])}:
        raise UnknownKey(f"unknown key {key!r}")
    return sec, name


def _coerce(raw: str, typ, key: str, where: str = ""):
    text = raw.strip()
    try:
        if typ is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
        if typ is list:
            return [float(x) for x in text.split(",") if x.strip()]
        return text
    except ValueError:
        name = getattr(typ, "__name__", str(typ))
        raise ConfigTypeError(f"{where}{key}: expected {name}, got {text!r}") from None


def _locate(lines: list[str], section: str, key: str) -> str:
    """'line:col: ' of ``key`` inside ``[section]``, or '' if not found."""
    current = None
    for i, line in enumerate(lines, 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        m = re.match(rf"(\s*{re.escape(key)}\s*[=:]\s*)", line)
        if m and current == section:
            return f"{i}:{m.end(1) + 1}: "
    return ""


def validate(cfg: RunConfig):
    checks = [
        ("grid.n", cfg.grid.n >= 8 and cfg.grid.n % 2 == 0, "must be an even integer >= 8"),
        ("grid.length", cfg.grid.length > 0, "must be positive"),
        ("params.eps", cfg.params.eps >= 0, "must be >= 0"),
        ("params.g", cfg.params.g > 0, "must be positive"),
        ("params.h_bar", cfg.params.h_bar > 0, "must be positive"),
        ("run.horizon", cfg.run.horizon > 0, "must be positive"),
        ("run.solver", cfg.run.solver in ("lines", "mild"), "must be 'lines' or 'mild'"),
        ("step.cfl", 0 < cfg.step.cfl <= 1, "must lie in (0, 1]"),
        ("step.dt_max", cfg.step.dt_max > 0, "must be positive"),
        ("step.sample_every", cfg.step.sample_every >= 1, "must be >= 1"),
        ("coriolis.profile", cfg.coriolis.profile in ("constant", "sine"), "must be 'constant' or 'sine'"),
        ("initial.kind", cfg.initial.kind in ("gaussian_bump", "sine", "two_bump"), "unknown generator"),
        ("initial.width", cfg.initial.width > 0, "must be positive"),
        ("mild.c_w", cfg.mild.c_w > 0, "must be positive"),
        ("mild.tol", cfg.mild.tol > 0, "must be positive"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(f"{key} {msg}")


def parse_config(path, overrides=(), strict: bool = False) -> RunConfig:
    """Read an INI-style config file and apply ``key=value`` overrides."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    lines = text.splitlines()
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    values: dict[str, dict] = {name: {} for name in SECTIONS}
    for sec in cp.sections():
        if sec not in SECTIONS:
            msg = f"{path}: unknown section [{sec}]"
            if strict:
                raise UnknownKey(msg)
            log.warning(msg)
            continue
        hints = get_type_hints(SECTIONS[sec])
        for key, raw in cp.items(sec):
            if key not in hints:
                msg = f"{path}:{_locate(lines, sec, key)}unknown key {sec}.{key}"
                if strict:
                    raise UnknownKey(msg)
                log.warning(msg)
                continue
            where = f"{path}:{_locate(lines, sec, key)}"
            values[sec][key] = _coerce(raw, hints[key], f"{sec}.{key}", where)

    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        sec, name = _split_key(key.strip())
        hints = get_type_hints(SECTIONS[sec])
        values[sec][name] = _coerce(raw, hints[name], f"{sec}.{name}", "override ")

    for sec, cls in SECTIONS.items():
        for f in fields(cls):
            if f.default is _REQUIRED and f.name not in values[sec]:
                key = f.name if sec == "run" else f"{sec}.{f.name}"
                raise MissingKey(f"{path}: missing required key {key}")
    cfg = RunConfig.from_dict(values)
    validate(cfg)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Render a config back to the INI format accepted by :func:`parse_config`."""
    out = []
    for sec, d in cfg.to_dict().items():
        out.append(f"[{sec}]")
        for k, v in d.items():
            if isinstance(v, list):
                v = ", ".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{k} = {v}")
        out.append("")
    return "\n".join(out)
