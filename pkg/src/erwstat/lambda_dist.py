"""The law of Lambda = int_0^1 B_t^2 dt and its quantiles.

Lambda is sampled from its Karhunen-Loeve series

    Lambda = sum_{n >= 1} c_n xi_n^2,    c_n = 4 / ((2n - 1)^2 pi^2),

truncated after K terms, with the tail replaced by its mean
sum_{n > K} c_n = psi'(K + 1/2) / pi^2.  The tail's variance is
2 sum_{n>K} c_n^2 < 1 / (3 pi^4 K^3), about 1e-9 at the default K.

Term ``n`` draws its normals from substream ``n`` of the caller's stream,
so raising K at a fixed seed only adds terms: every sample moves by
sum_{K < n <= K'} c_n xi_n^2 minus the change in tail mean.  With
probability 0.999 per term xi_n^2 < 10.83, which bounds the shift of any
quantile by about 10.83 * tail_mean(K).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import special, stats

from .errors import ConfigurationError, DomainError
from .rng import RngStream

DEFAULT_TRUNCATION = 200
DEFAULT_SAMPLES = 10**6
TABLE_VERSION = 1
TABLE_LEVELS = (0.01, 0.05, 0.10, 0.90, 0.95, 0.99)
CHI2_1_999 = 10.827566170662733  # 99.9% quantile of chi-square(1)
_BLOCK = 16  # terms per partial sum; fixed so the merge order never depends on workers


def kl_weights(k: int) -> np.ndarray:
    n = np.arange(1, k + 1, dtype=np.float64)
    return 4.0 / ((2.0 * n - 1.0) ** 2 * math.pi**2)


def tail_mean(k: int) -> float:
    """sum_{n > k} 4 / ((2n - 1)^2 pi^2)."""
    return float(special.polygamma(1, k + 0.5)) / math.pi**2


@dataclass(frozen=True)
class LambdaSampler:
    truncation: int = DEFAULT_TRUNCATION
    tail_correction: bool = True

    def __post_init__(self):
        if int(self.truncation) < 1:
            raise DomainError("truncation must be >= 1")
        object.__setattr__(self, "truncation", int(self.truncation))

    @property
    def tail_mean(self) -> float:
        return tail_mean(self.truncation) if self.tail_correction else 0.0

    @property
    def weights(self) -> np.ndarray:
        return kl_weights(self.truncation)

    def shift_bound(self) -> float:
        """Bound on how far quantiles move when truncation grows from this K."""
        return CHI2_1_999 * tail_mean(self.truncation)


def _block_sum(rng: RngStream, weights: np.ndarray, first: int, size: int) -> np.ndarray:
    acc = np.zeros(size)
    for j, c in enumerate(weights, start=first):
        xi = rng.substream(j).normals(size)
        acc += c * (xi * xi)
    return acc


def sample_lambda(sampler: LambdaSampler, rng: RngStream, size: int | None = None,
                  workers: int = 1):
    """Draw Lambda; a float when ``size`` is None, otherwise an array of ``size`` draws."""
    m = 1 if size is None else int(size)
    w = sampler.weights
    starts = range(0, sampler.truncation, _BLOCK)
    jobs = [(rng, w[s:s + _BLOCK], s + 1, m) for s in starts]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _block_sum(*job), jobs))
    else:
        parts = [_block_sum(*job) for job in jobs]
    total = np.zeros(m)
    for part in parts:
        total += part
    total += sampler.tail_mean
    return float(total[0]) if size is None else total


@dataclass(frozen=True)
class QuantileEstimate:
    level: float
    quantile: float
    stderr: float


def _order_stat_quantile(sorted_x: np.ndarray, level: float) -> QuantileEstimate:
    """Empirical quantile x_(r), r = ceil(level m), with its exact bootstrap stderr.

    The bootstrap quantile equals x_(j) with probability
    P(Bin(m, j/m) >= r) - P(Bin(m, (j-1)/m) >= r), so the bootstrap variance
    is a finite weighted sum over order statistics near r.
    """
    m = sorted_x.size
    r = max(1, math.ceil(level * m))
    half = int(12 * math.sqrt(m * level * (1 - level))) + 2
    j = np.arange(max(1, r - half), min(m, r + half) + 1)
    cdf_hi = stats.binom.sf(r - 1, m, j / m)
    cdf_lo = stats.binom.sf(r - 1, m, (j - 1) / m)
    wts = cdf_hi - cdf_lo
    vals = sorted_x[j - 1]
    mu = np.sum(wts * vals) / np.sum(wts)
    var = np.sum(wts * (vals - mu) ** 2) / np.sum(wts)
    return QuantileEstimate(level, float(sorted_x[r - 1]), float(math.sqrt(var)))


def _check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0,1), got {level}")
    return level


def lambda_quantiles(levels, samples: int = DEFAULT_SAMPLES, rng: RngStream | None = None,
                     sampler: LambdaSampler | None = None, workers: int = 1):
    """Quantile estimates of Lambda at every CDF level in ``levels`` from one sample set."""
    levels = [_check_level(lv) for lv in levels]
    if samples < 1000:
        raise DomainError("need at least 1000 samples")
    rng = rng if rng is not None else RngStream(0)
    sampler = sampler or LambdaSampler()
    draws = np.sort(sample_lambda(sampler, rng, samples, workers=workers))
    return [_order_stat_quantile(draws, lv) for lv in levels]


def lambda_quantile(level: float, samples: int = DEFAULT_SAMPLES, rng: RngStream | None = None,
                    sampler: LambdaSampler | None = None, workers: int = 1) -> QuantileEstimate:
    """Empirical CDF-level quantile of Lambda.

    ``level`` is a plain CDF level: the upper 5% critical value used by the
    critical-vs-superdiffusive test is ``lambda_quantile(0.95)``.
    """
    return lambda_quantiles([level], samples, rng, sampler, workers)[0]


def _key(level: float) -> float:
    return round(float(level), 10)


@dataclass(frozen=True)
class QuantileTable:
    entries: dict = field(default_factory=dict)  # level -> QuantileEstimate
    truncation: int = DEFAULT_TRUNCATION
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    version: int = TABLE_VERSION

    MAX_STDERR = 0.01

    def levels(self) -> list[float]:
        return sorted(self.entries)

    def lookup(self, level: float) -> QuantileEstimate:
        try:
            est = self.entries[_key(level)]
        except KeyError:
            raise ConfigurationError(
                f"quantile table has no level {level}; available {self.levels()}") from None
        if not est.stderr <= self.MAX_STDERR:
            raise ConfigurationError(
                f"Monte Carlo stderr {est.stderr:.4g} at level {level} exceeds {self.MAX_STDERR}")
        return est

    def quantile(self, level: float) -> float:
        return self.lookup(level).quantile

    def provenance(self) -> dict:
        return {"K": self.truncation, "samples": self.samples, "seed": self.seed,
                "version": self.version}

    def to_json(self) -> str:
        rows = [{"level": lv, "quantile": e.quantile, "stderr": e.stderr,
                 "K": self.truncation, "samples": self.samples, "seed": self.seed}
                for lv, e in sorted(self.entries.items())]
        return json.dumps({"version": self.version, "entries": rows}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "QuantileTable":
        try:
            data = json.loads(text)
            rows = data["entries"]
            entries = {_key(r["level"]): QuantileEstimate(float(r["level"]), float(r["quantile"]),
                                                          float(r["stderr"])) for r in rows}
            first = rows[0]
            table = cls(entries, int(first["K"]), int(first["samples"]), int(first["seed"]),
                        int(data.get("version", TABLE_VERSION)))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed quantile table: {exc}") from None
        qs = [table.entries[lv].quantile for lv in table.levels()]
        if any(b < a for a, b in zip(qs, qs[1:])):
            raise ConfigurationError("quantile table is not monotone in level")
        return table


def generate_table(levels=TABLE_LEVELS, samples: int = DEFAULT_SAMPLES, seed: int = 20210301,
                   truncation: int = DEFAULT_TRUNCATION, workers: int = 1) -> QuantileTable:
    rng = RngStream(seed, (0x4C414D42,))  # "LAMB"
    ests = lambda_quantiles(levels, samples, rng, LambdaSampler(truncation), workers)
    return QuantileTable({_key(e.level): e for e in ests}, truncation, samples, seed)


def load_default_table() -> QuantileTable:
    """The quantile table shipped with the package."""
    try:
        text = resources.files("erwstat").joinpath("data/quantile_table.json").read_text()
    except FileNotFoundError:
        raise ConfigurationError("shipped quantile table is missing") from None
    return QuantileTable.from_json(text)


def load_table(path=None) -> QuantileTable:
    if path is None:
        return load_default_table()
    try:
        with open(path, encoding="utf-8") as fh:
            return QuantileTable.from_json(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read quantile table {path}: {exc}") from None


if __name__ == "__main__":
    import sys

    out = sys.argv[1] if len(sys.argv) > 1 else "quantile_table.json"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(generate_table().to_json())
    print(f"wrote {out}")
