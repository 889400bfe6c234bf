"""Elephant random walk model and exact simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidPositionError, InvalidStepError
from .rng import RngStream

MAX_LENGTH = 2**62


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0,1]")
    return value


@dataclass(frozen=True)
class MemoryParams:
    """Memory ``p`` and first-step probability ``q`` of an elephant walk."""

    p: float
    q: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "p", _check_probability("p", self.p))
        object.__setattr__(self, "q", _check_probability("q", self.q))

    @property
    def a(self) -> float:
        return 2.0 * self.p - 1.0


class WalkPath:
    """An immutable trajectory: steps X_1..X_n in {-1, +1} and positions S_1..S_n."""

    __slots__ = ("_steps", "_positions")

    def __init__(self, steps, positions=None):
        steps = np.array(steps, dtype=np.int64).ravel()
        if steps.size < 1:
            raise InvalidStepError("a path needs at least one step")
        if steps.size > MAX_LENGTH:
            raise InvalidStepError("path length exceeds 2**62")
        if not np.all((steps == 1) | (steps == -1)):
            raise InvalidStepError("every step must be -1 or +1")
        cums = np.cumsum(steps)
        if positions is not None:
            positions = np.asarray(positions, dtype=np.int64).ravel()
            if not np.array_equal(positions, cums):
                raise InvalidStepError("positions are not the prefix sums of steps")
        steps = steps.astype(np.int8)
        steps.setflags(write=False)
        cums.setflags(write=False)
        self._steps = steps
        self._positions = cums

    @property
    def steps(self) -> np.ndarray:
        return self._steps

    @property
    def positions(self) -> np.ndarray:
        return self._positions

    @property
    def n(self) -> int:
        return int(self._steps.size)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, WalkPath):
            return NotImplemented
        return np.array_equal(self._steps, other._steps)

    def __hash__(self):
        return hash(self._steps.tobytes())

    def __repr__(self):
        head = ",".join(str(int(x)) for x in self._steps[:8])
        more = ",..." if self.n > 8 else ""
        return f"WalkPath(n={self.n}, steps=[{head}{more}])"

    def prefix(self, m: int) -> "WalkPath":
        if not 1 <= m <= self.n:
            raise ValueError("prefix length out of range")
        return WalkPath(self._steps[:m])


def step_probability(params: MemoryParams, s: int, n: int) -> float:
    """P(X_{n+1} = +1 | S_n = s) = (1 + a s / n) / 2."""
    if n < 1:
        raise InvalidPositionError("step count n must be >= 1")
    if abs(s) > n:
        raise InvalidPositionError(f"position {s} unreachable after {n} steps")
    prob = 0.5 * (1.0 + params.a * s / n)
    return min(1.0, max(0.0, prob))


def path_probability(path: WalkPath, params: MemoryParams) -> float:
    """Probability the simulator assigns to ``path`` (product of its step laws)."""
    x = path.steps
    prob = params.q if x[0] == 1 else 1.0 - params.q
    s = int(x[0])
    for k in range(1, path.n):
        pk = step_probability(params, s, k)
        prob *= pk if x[k] == 1 else 1.0 - pk
        s += int(x[k])
    return prob


def _draw(params: MemoryParams, rng: RngStream, s0: int, n0: int, count: int) -> np.ndarray:
    u = rng.uniforms(n0, count)
    out = np.empty(count, dtype=np.int8)
    _kernels.fill_steps(u, params.q, params.a, s0, n0, out)
    return out


def simulate_walk(params: MemoryParams, n: int, rng: RngStream) -> WalkPath:
    """Simulate ``n`` steps, consuming uniform draws ``0 .. n-1`` of ``rng``.

    Steps are sampled from the conditional Rademacher law of the next step
    given the current position, which has the same distribution as recalling
    a uniformly chosen past step and repeating it with probability ``p``.
    """
    n = int(n)
    if not 1 <= n <= MAX_LENGTH:
        raise ValueError("n must be >= 1")
    return WalkPath(_draw(params, rng, 0, 0, n))


def extend_walk(path: WalkPath, params: MemoryParams, extra: int, rng: RngStream) -> WalkPath:
    """Append ``extra`` steps, continuing ``rng`` at draw position ``path.n``."""
    extra = int(extra)
    if extra < 0:
        raise ValueError("extra must be non-negative")
    if extra == 0:
        return path
    more = _draw(params, rng, int(path.positions[-1]), path.n, extra)
    return WalkPath(np.concatenate([path.steps, more]))


def expected_square_position(params: MemoryParams, n: int) -> float:
    """E[S_n^2] from the recursion E[S_{k+1}^2] = (1 + 2a/k) E[S_k^2] + 1."""
    e = 1.0
    a = params.a
    for k in range(1, n):
        e = e * (1.0 + 2.0 * a / k) + 1.0
    return e


def regime(p: float) -> str:
    if math.isclose(p, 0.75, rel_tol=0, abs_tol=1e-12):
        return "critical"
    return "diffusive" if p < 0.75 else "superdiffusive"
