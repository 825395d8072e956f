"""Model parameters and the common estimate record."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

from .paths import InvalidParameter


def default_n_steps(a: float, t_end: float) -> int:
    """Smallest step count with dt <= min(a^2/8, t_end/1024)."""
    return max(1024, math.ceil(8.0 * t_end / (a * a) - 1e-9))


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical parameters.

    ``halfwidth`` is the half-length of the window in which initial trap
    points are sampled; ``None`` picks ``buffer_mult * sqrt(2 t_end) + a``.
    ``n_steps=None`` picks :func:`default_n_steps`.
    """

    lam: float
    a: float
    t_end: float
    n_steps: int | None = None
    halfwidth: float | None = None
    buffer_mult: float = 6.0

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise InvalidParameter(f"lam must be non-negative, got {self.lam}")
        if not self.a > 0:
            raise InvalidParameter(f"a must be positive, got {self.a}")
        if not self.t_end > 0:
            raise InvalidParameter(f"t_end must be positive, got {self.t_end}")
        if not self.buffer_mult > 0:
            raise InvalidParameter("buffer_mult must be positive")
        if self.n_steps is None:
            object.__setattr__(self, "n_steps", default_n_steps(self.a, self.t_end))
        elif int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidParameter(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        floor = self.buffer_mult * math.sqrt(2.0 * self.t_end) + self.a
        if self.halfwidth is None:
            object.__setattr__(self, "halfwidth", floor)
        elif self.halfwidth < floor * (1 - 1e-12):
            raise InvalidParameter(
                f"halfwidth {self.halfwidth} is below buffer_mult*sqrt(2 t_end) + a = {floor}"
            )

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def expected_traps(self) -> float:
        return 2.0 * self.lam * self.halfwidth

    def with_(self, **changes: Any) -> SimParams:
        """Copy with changes; derived fields are recomputed unless given."""
        base = {"n_steps": None, "halfwidth": None}
        if "t_end" not in changes and "a" not in changes:
            base["n_steps"] = self.n_steps
        if not {"t_end", "a", "buffer_mult"} & changes.keys():
            base["halfwidth"] = self.halfwidth
        return replace(self, **{**base, **changes})


@dataclass
class Estimate:
    value: float
    std_err: float
    n: int
    method: str
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.std_err < 0:
            raise ValueError("std_err must be non-negative")

    def as_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "std_err": self.std_err,
            "n": self.n,
            "method": self.method,
            **self.extras,
        }


def combined_se(*estimates: Estimate) -> float:
    return math.sqrt(sum(e.std_err**2 for e in estimates))
