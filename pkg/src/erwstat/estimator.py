"""Quasi-maximum-likelihood estimation of the memory parameter.

All statistics are built from the running ratios ``r_k = S_k / k``:

* ``p_hat = sum r_k (X_{k+1} + r_k) / (2 sum r_k^2)``
* ``V_n = 4 sum r_k^2``
* ``M_n = sum r_k (X_{k+1} - a r_k)`` with ``a = 2p - 1``

so that ``p_hat - p = 2 M_n / V_n`` holds identically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import InsufficientDataError, InvalidStepError, UndefinedSplitError
from .walk import WalkPath


def _need(path: WalkPath, n_min: int = 2):
    if path.n < n_min:
        raise InsufficientDataError(f"need a path of length >= {n_min}, got {path.n}")


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0,1]")
    return p


def _ratios(path: WalkPath) -> tuple[np.ndarray, np.ndarray]:
    """(r_k, X_{k+1}) for k = 1 .. n-1."""
    k = np.arange(1, path.n, dtype=np.float64)
    return path.positions[:-1] / k, path.steps[1:].astype(np.float64)


def _add(total: float, comp: float, x: float) -> tuple[float, float]:
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


@dataclass(frozen=True)
class EstimatorState:
    """Running sums over k = 1 .. n-1 of r_k X_{k+1}, r_k^2 and r_k^4."""

    n: int = 0
    last_position: int = 0
    cross: tuple[float, float] = field(default=(0.0, 0.0), repr=False)
    sq: tuple[float, float] = field(default=(0.0, 0.0), repr=False)
    quad: tuple[float, float] = field(default=(0.0, 0.0), repr=False)

    @classmethod
    def from_path(cls, path: WalkPath) -> "EstimatorState":
        c_s, c_c, q_s, q_c, f_s, f_c = _kernels.path_sums(path.steps, path.positions)
        return cls(path.n, int(path.positions[-1]), (c_s, c_c), (q_s, q_c), (f_s, f_c))

    @property
    def sum_cross(self) -> float:
        return self.cross[0] + self.cross[1]

    @property
    def sum_sq(self) -> float:
        return self.sq[0] + self.sq[1]

    @property
    def sum_quad(self) -> float:
        return self.quad[0] + self.quad[1]

    def update(self, x_next: int) -> "EstimatorState":
        return update(self, x_next)


def update(state: EstimatorState, x_next: int) -> EstimatorState:
    """Consume one step, using the ratio S_n / n from before the step."""
    if x_next not in (-1, 1):
        raise InvalidStepError(f"step must be -1 or +1, got {x_next!r}")
    if state.n == 0:
        return EstimatorState(1, int(x_next))
    r = state.last_position / state.n
    r2 = r * r
    return EstimatorState(
        state.n + 1,
        state.last_position + int(x_next),
        _add(*state.cross, r * x_next),
        _add(*state.sq, r2),
        _add(*state.quad, r2 * r2),
    )


@dataclass(frozen=True)
class EstimateReport:
    p_hat: float
    v_n: float
    n: int
    m_n: float | None = None

    @property
    def p_hat_clamped(self) -> float:
        return min(1.0, max(0.0, self.p_hat))

    @classmethod
    def from_state(cls, state: EstimatorState, p: float | None = None) -> "EstimateReport":
        if state.n < 2:
            raise InsufficientDataError("need at least two steps")
        sq = state.sum_sq
        m_n = None if p is None else state.sum_cross - (2.0 * _check_p(p) - 1.0) * sq
        return cls((state.sum_cross + sq) / (2.0 * sq), 4.0 * sq, state.n, m_n)

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat, "p_hat_clamped": self.p_hat_clamped,
                "v_n": self.v_n, "n": self.n}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateReport":
        return cls(float(data["p_hat"]), float(data["v_n"]), int(data["n"]))


def estimate(path: WalkPath, p: float | None = None) -> EstimateReport:
    """Estimate the memory parameter from ``path``.

    ``p_hat`` is reported raw and may leave [0, 1] on short paths.  When a
    reference ``p`` is given the report also carries ``M_n`` at that value.
    """
    _need(path)
    report = EstimateReport.from_state(EstimatorState.from_path(path))
    if p is not None:
        report = EstimateReport(report.p_hat, report.v_n, report.n, martingale_m(path, p))
    return report


def v_statistic(path: WalkPath) -> float:
    _need(path)
    return 4.0 * EstimatorState.from_path(path).sum_sq


def martingale_m(path: WalkPath, p: float) -> float:
    _need(path)
    a = 2.0 * _check_p(p) - 1.0
    return _kernels.martingale_sum(path.steps, path.positions, a)


def predictable_qv(path: WalkPath, p: float) -> float:
    """<M>_n = sum r_k^2 - a^2 sum r_k^4."""
    _need(path)
    a = 2.0 * _check_p(p) - 1.0
    st = EstimatorState.from_path(path)
    return max(0.0, st.sum_sq - a * a * st.sum_quad)


def running_estimates(path: WalkPath) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(k, p_hat_k, V_k) for every prefix length k = 2 .. n."""
    _need(path)
    r, x = _ratios(path)
    cross = np.cumsum(r * x)
    sq = np.cumsum(r * r)
    k = np.arange(2, path.n + 1)
    return k, (cross + sq) / (2.0 * sq), 4.0 * sq


def running_estimates_csv(path: WalkPath) -> str:
    k, p_hat, v = running_estimates(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "p_hat", "v_n"])
    for row in zip(k.tolist(), p_hat.tolist(), v.tolist()):
        w.writerow([row[0], repr(row[1]), repr(row[2])])
    return buf.getvalue()


def _first_step_log(x1: int, q: float) -> float:
    prob = q if x1 == 1 else 1.0 - q
    return math.log(prob) if prob > 0 else -math.inf


def log_likelihood(path: WalkPath, p: float, q: float = 0.5) -> float:
    """Exact log-likelihood; ``-inf`` if some observed step had probability zero."""
    a = 2.0 * _check_p(p) - 1.0
    q = _check_p(q)
    first = _first_step_log(int(path.steps[0]), q)
    if path.n == 1:
        return first
    r, x = _ratios(path)
    pk = 0.5 * (1.0 + a * r)
    probs = np.where(x > 0, pk, 1.0 - pk)
    if np.any(probs <= 0.0) or first == -math.inf:
        return -math.inf
    return math.fsum(np.log(probs)) + first


def score(path: WalkPath, p: float) -> float:
    """Derivative of the log-likelihood in ``p``: sum 2 X_{k+1} r_k / (1 + a X_{k+1} r_k)."""
    _need(path)
    a = 2.0 * _check_p(p) - 1.0
    r, x = _ratios(path)
    xr = x * r
    den = 1.0 + a * xr
    if np.any(den == 0.0):
        # zero denominators need |a| = 1 and X r = -a; all such terms share a sign
        return -math.copysign(math.inf, a)
    return math.fsum(2.0 * xr / den)


def conditional_fisher(path: WalkPath, p: float) -> float:
    """I_n(p) = sum r_k^2 / (p_k (1 - p_k))."""
    _need(path)
    a = 2.0 * _check_p(p) - 1.0
    r, _ = _ratios(path)
    pk = 0.5 * (1.0 + a * r)
    var = pk * (1.0 - pk)
    live = r != 0.0
    if np.any(var[live] <= 0.0):
        return math.inf
    return math.fsum(r[live] ** 2 / var[live])


def quasi_log_likelihood(path: WalkPath, p: float, q: float = 0.5) -> float:
    """Second-order Taylor surrogate of the log-likelihood, defined for any real ``p``."""
    p = float(p)
    if not math.isfinite(p):
        raise ValueError("p must be finite")
    a = 2.0 * p - 1.0
    first = _first_step_log(int(path.steps[0]), _check_p(q))
    if path.n == 1:
        return first
    r, x = _ratios(path)
    return math.fsum(a * r * (x - 0.5 * a * r)) - (path.n - 1) * math.log(2.0) + first


class LanSplit(NamedTuple):
    P: float
    Q: float
    R: float

    def recombine(self, h: float, speed: float) -> float:
        d = speed**-0.5
        return 2 * h * d * self.P - 2 * h * h * d * d * self.Q + 2 * h * h * d * d * self.R


def _taylor_rest(y: np.ndarray) -> np.ndarray:
    """R(y) with log(1 + y) = y - y^2/2 + y^2 R(y)."""
    out = np.empty_like(y)
    small = np.abs(y) < 1e-3
    ys = y[small]
    out[small] = ys * (1 / 3 - ys * (1 / 4 - ys * (1 / 5 - ys * (1 / 6 - ys / 7))))
    yb = y[~small]
    out[~small] = (np.log1p(yb) - yb + 0.5 * yb * yb) / (yb * yb)
    return out


def lan_split(path: WalkPath, p: float, h: float, speed: float) -> LanSplit:
    """Split l_n(p + h/sqrt(speed)) - l_n(p) into its score, curvature and remainder parts.

    With ``d = speed**-0.5`` the log-likelihood ratio equals
    ``2 h d P - 2 h^2 d^2 Q + 2 h^2 d^2 R``.  ``R`` is summed term by term from
    the exact Taylor remainder, not taken as a residual.
    """
    _need(path)
    p = _check_p(p)
    if speed <= 0:
        raise ValueError("speed must be positive")
    d = speed**-0.5
    p_alt = p + d * h
    if not 0.0 <= p_alt <= 1.0:
        raise UndefinedSplitError("shifted memory parameter leaves [0,1]")
    a = 2.0 * p - 1.0
    r, x = _ratios(path)
    den = 1.0 + a * x * r
    if np.any(den <= 0.0):
        raise UndefinedSplitError("observed step impossible under p")
    y = 2.0 * d * h * x * r / den
    if np.any(y <= -1.0):
        raise UndefinedSplitError("observed step impossible under the shifted parameter")
    P = math.fsum(x * r / den)
    w = r * r / (den * den)
    Q = math.fsum(w)
    R = math.fsum(2.0 * w * _taylor_rest(y))
    return LanSplit(P, Q, R)
