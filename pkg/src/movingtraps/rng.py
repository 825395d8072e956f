"""Deterministic, splittable random streams.

A stream is identified by a 64-bit seed and a lineage of small non-negative
integers, e.g. ``(replicate, path, inner)``. Streams are built from numpy's
``SeedSequence`` spawn keys feeding a counter-based Philox generator, so the
stream for a given lineage never depends on which other streams were created
or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U32 = 2**32


@dataclass(frozen=True)
class StreamKey:
    seed: int
    lineage: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        lineage = tuple(int(i) for i in self.lineage)
        # entries >= 2**32 would alias multi-word lineages inside SeedSequence
        if any(i < 0 or i >= _U32 for i in lineage):
            raise ValueError(f"lineage entries must lie in [0, 2**32), got {lineage}")
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "lineage", lineage)

    def child(self, *index: int) -> StreamKey:
        return StreamKey(self.seed, self.lineage + tuple(index))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=self.lineage)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def __str__(self) -> str:
        return f"{self.seed}:{'/'.join(map(str, self.lineage))}"


def as_key(key: StreamKey | int) -> StreamKey:
    return key if isinstance(key, StreamKey) else StreamKey(int(key))
