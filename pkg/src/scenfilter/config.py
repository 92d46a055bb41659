"""Experiment configuration.

The file format is flat ``key = value`` text, one entry per line, ``#``
starts a comment, and a ``schema_version`` line is required. Precedence,
lowest first: dataclass defaults, the file, ``SCENFILTER_<KEY>`` environment
variables, command-line flags.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Optional

from scenfilter.backtest import BASE_METHODS, BacktestParams, WindowScheme

SCHEMA_VERSION = 1
ENV_PREFIX = "SCENFILTER_"
FLOOR_MODES = ("inequality", "equality")


class ConfigError(ValueError):
    """Validation failure; the message names the offending field."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    data: str = ""  # empty: the bundled synthetic panel
    methods: tuple[str, ...] = BASE_METHODS
    K_max: int = 5
    p: int = 5
    q: float = 1.25
    floor_mode: str = "inequality"
    use_cuts: bool = False
    in_sample_len: int = 52
    out_sample_len: int = 12
    step: int = 12
    time_limit: float = 7200.0
    out_dir: str = "results"
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    schema_version: int = field(default=SCHEMA_VERSION)

    def validate(self) -> "ExperimentConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {self.schema_version}")
        if not self.methods:
            raise ConfigError("methods", "at least one method is required")
        for m in self.methods:
            if m not in BASE_METHODS:
                raise ConfigError("methods", f"unknown method {m!r}; expected one of "
                                             f"{', '.join(BASE_METHODS)}")
        if self.in_sample_len < 2:
            raise ConfigError("in_sample_len", "must be at least 2")
        if self.out_sample_len < 1:
            raise ConfigError("out_sample_len", "must be at least 1")
        if self.step < 1:
            raise ConfigError("step", "must be at least 1")
        if not 0 <= self.K_max <= self.in_sample_len / 2:
            raise ConfigError("K_max", f"must lie in [0, in_sample_len/2 = "
                                       f"{self.in_sample_len / 2:g}], got {self.K_max}")
        if self.p < 1:
            raise ConfigError("p", "must be at least 1")
        if not self.q > 0:
            raise ConfigError("q", "must be positive")
        if self.floor_mode not in FLOOR_MODES:
            raise ConfigError("floor_mode", f"expected one of {', '.join(FLOOR_MODES)}")
        if not self.time_limit > 0:
            raise ConfigError("time_limit", "must be positive")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        return self

    @property
    def scheme(self) -> WindowScheme:
        return WindowScheme(self.in_sample_len, self.out_sample_len, self.step)

    def backtest_params(self) -> BacktestParams:
        return BacktestParams(K_max=self.K_max, p=self.p, q=self.q, time_limit=self.time_limit,
                              floor_mode=self.floor_mode, use_cuts=self.use_cuts,
                              workers=self.workers)

    def dumps(self) -> str:
        lines = [f"schema_version = {self.schema_version}"]
        for f in fields(self):
            if f.name == "schema_version":
                continue
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def with_overrides(self, values: Mapping[str, object]) -> "ExperimentConfig":
        return replace(self, **{k: _coerce(k, v) for k, v in values.items() if v is not None})


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _format(v) -> str:
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(key: str, raw):
    if key not in _TYPES:
        raise ConfigError(key, "unknown configuration key")
    kind = _TYPES[key]
    if not isinstance(raw, str):
        if kind.startswith("tuple"):
            return tuple(raw)
        return raw
    text = raw.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if kind.startswith("tuple"):
            return tuple(t.strip() for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind}") from exc
    return text


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}", "expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(key, "duplicate key")
        values[key] = val
    if "schema_version" not in values:
        raise ConfigError("schema_version", "missing")
    return ExperimentConfig().with_overrides(values)


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key in _TYPES:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            out[key] = environ[name]
    return out


def load_config(path=None, flags: Optional[Mapping[str, object]] = None,
                environ: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError("config", f"file not found: {p}")
        cfg = parse_config(p.read_text())
    cfg = cfg.with_overrides(env_overrides(environ))
    if flags:
        cfg = cfg.with_overrides(flags)
    return cfg.validate()
