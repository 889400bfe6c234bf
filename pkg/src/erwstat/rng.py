"""Counter-based random streams.

Every stream is addressed by ``(seed, index)``.  The key of a Philox4x64
generator is derived from both through :class:`numpy.random.SeedSequence`,
so distinct indices give independent streams and nothing is shared or
mutated between callers.  Uniform draws are addressable by position: draw
``k`` of a stream is a pure function of ``(seed, index, k)``.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

_LANES = 4  # Philox4x64 emits four 64-bit words per counter value
_DOUBLE_SCALE = 2.0**-53


def stream_index(tag: str, replication: int) -> tuple[int, int]:
    """Stable stream index for replication ``replication`` of experiment ``tag``."""
    return (zlib.crc32(tag.encode("utf-8")), int(replication))


@dataclass(frozen=True)
class RngStream:
    seed: int
    index: tuple[int, ...] = field(default=())

    def __post_init__(self):
        idx = self.index
        if isinstance(idx, (int, np.integer)):
            idx = (int(idx),)
        idx = tuple(int(i) for i in idx)
        if int(self.seed) < 0 or any(i < 0 for i in idx):
            raise ValueError("seed and stream index must be non-negative")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "index", idx)

    @cached_property
    def key(self) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.index)
        return ss.generate_state(2, dtype=np.uint64)

    def substream(self, *extra: int) -> "RngStream":
        return RngStream(self.seed, self.index + tuple(int(e) for e in extra))

    def raw(self, start: int, count: int) -> np.ndarray:
        """Raw 64-bit words at positions ``start .. start + count - 1``."""
        if start < 0 or count < 0:
            raise ValueError("start and count must be non-negative")
        block, lane = divmod(int(start), _LANES)
        counter = np.array([block, 0, 0, 0], dtype=np.uint64)
        bitgen = np.random.Philox(key=self.key, counter=counter)
        if lane:
            bitgen.random_raw(lane)
        if count == 0:
            return np.empty(0, dtype=np.uint64)
        return bitgen.random_raw(int(count))

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """Doubles in [0, 1) at positions ``start .. start + count - 1``."""
        return (self.raw(start, count) >> np.uint64(11)) * _DOUBLE_SCALE

    def normals(self, count: int) -> np.ndarray:
        """The first ``count`` standard normal draws of this stream."""
        gen = np.random.Generator(np.random.Philox(key=self.key))
        return gen.standard_normal(int(count))
