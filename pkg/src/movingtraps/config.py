"""Experiment configuration in a flat INI file.

Every field has a default, so an empty file is a valid configuration.
``serialize(parse(text))`` is a fixed point of ``serialize . parse``.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, replace
from typing import Any

from .conditional import DEFAULT_C3, EventParamsA, EventParamsB
from .params import SimParams
from .paths import InvalidParameter

VERSION = "v0.1.0"


class ConfigError(ValueError):
    """The configuration file cannot be parsed or violates an invariant."""


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text: str):
        return None if text.strip().lower() in ("", "none", "auto") else conv(text)

    return parse


def _fmt(v: Any) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class ExperimentConfig:
    # [model]
    lam: float = 0.5
    a: float = 0.1
    t_end: float = 1.0
    n_steps: int | None = None
    buffer_mult: float = 6.0
    halfwidth: float | None = None
    # [grid]
    t_grid: tuple[float, ...] = (4.0, 16.0, 64.0, 256.0)
    cond_n_steps: int = 1024
    # [budgets]
    n_paths: int = 20000
    n_outer: int = 2000
    m_inner: int = 256
    batch_size: int = 256
    # [events]
    kappa: float = 0.5
    epsilon_a: float = 0.5
    k_a: float = 1.0
    epsilon_b: float = 0.5
    k_b: float = 0.5
    f_exponent: float = 0.1
    c3_values: tuple[float, ...] = DEFAULT_C3
    b_k_sweep: tuple[float, ...] = (1.0, 1.5)
    # [run]
    seed: int = 20240611
    output_dir: str = "out"
    mode: str = "bridge"
    debias: bool = False
    greedy_b: bool = False
    continuity_correction: bool = True
    threads: int | None = None

    def __post_init__(self) -> None:
        if not self.t_grid:
            raise ConfigError("t_grid must be non-empty")
        if any(t <= 0 for t in self.t_grid):
            raise ConfigError("t_grid entries must be positive")
        if self.mode not in ("naive", "bridge"):
            raise ConfigError(f"mode must be naive or bridge, got {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in ("n_paths", "n_outer", "m_inner", "batch_size", "cond_n_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        try:
            self.params()
            self.event_a()
            self.event_b()
        except InvalidParameter as e:
            raise ConfigError(str(e)) from e

    def params(self, **changes: Any) -> SimParams:
        base = SimParams(self.lam, self.a, self.t_end, self.n_steps, self.halfwidth, self.buffer_mult)
        return base.with_(**changes) if changes else base

    def event_a(self) -> EventParamsA:
        return EventParamsA(self.kappa, self.epsilon_a, self.k_a)

    def event_b(self) -> EventParamsB:
        return EventParamsB(self.epsilon_b, self.k_b, self.f_exponent)

    def with_(self, **changes: Any) -> ExperimentConfig:
        return replace(self, **changes)

    def hash(self) -> str:
        """Short digest of every field that can change numeric output."""
        d = asdict(self)
        d.pop("threads")
        d.pop("output_dir")
        text = "\n".join(f"{k}={_fmt(v)}" for k, v in sorted(d.items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


SECTIONS: dict[str, tuple[str, ...]] = {
    "model": ("lam", "a", "t_end", "n_steps", "buffer_mult", "halfwidth"),
    "grid": ("t_grid", "cond_n_steps"),
    "budgets": ("n_paths", "n_outer", "m_inner", "batch_size"),
    "events": ("kappa", "epsilon_a", "k_a", "epsilon_b", "k_b", "f_exponent", "c3_values", "b_k_sweep"),
    "run": ("seed", "output_dir", "mode", "debias", "greedy_b", "continuity_correction", "threads"),
}

_CONVERTERS = {
    "n_steps": _optional(int),
    "halfwidth": _optional(float),
    "threads": _optional(int),
    "t_grid": _floats,
    "c3_values": _floats,
    "b_k_sweep": _floats,
    "cond_n_steps": int,
    "n_paths": int,
    "n_outer": int,
    "m_inner": int,
    "batch_size": int,
    "seed": int,
    "output_dir": str,
    "mode": str,
    "debias": _bool,
    "greedy_b": _bool,
    "continuity_correction": _bool,
}


def parse(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e
    values: dict[str, Any] = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for name, raw in cp.items(section):
            if name not in SECTIONS[section]:
                raise ConfigError(f"unknown key {name!r} in [{section}]")
            try:
                values[name] = _CONVERTERS.get(name, float)(raw)
            except ValueError as e:
                raise ConfigError(f"bad value for {name}: {raw!r}") from e
    return ExperimentConfig(**values)


def serialize(cfg: ExperimentConfig) -> str:
    lines = []
    for section, names in SECTIONS.items():
        lines.append(f"[{section}]")
        lines += [f"{n} = {_fmt(getattr(cfg, n))}" for n in names]
        lines.append("")
    return "\n".join(lines)


def load(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
