"""Monte Carlo harness: normality, interval comparison, coverage, tests, V_n limits.

Replication ``r`` of experiment ``tag`` draws from stream
``RngStream(seed, stream_index(tag, r))`` only, so every replication is a
pure function of the configuration and its index.  Workers only change who
computes a replication, never what it computes; records are merged in
replication order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
from scipy import stats

from . import __version__, _kernels
from . import inference as inf
from .estimator import EstimateReport, EstimatorState, running_estimates
from .lambda_dist import QuantileTable
from .rng import RngStream, stream_index
from .walk import MemoryParams, simulate_walk

EXPERIMENTS = ("normality", "ci-comparison", "coverage", "test-size-power", "vn-limits")
HIST_WIDTH = 0.2
HIST_RANGE = (-4.0, 4.0)


def load_thresholds() -> dict:
    """Acceptance thresholds shared by the harness and the test-suite."""
    text = resources.files("erwstat").joinpath("data/thresholds.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    p: float
    n: int
    replications: int
    seed: int = 0
    q: float = 0.5
    alpha: float = 0.05
    p0: float = 0.5
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        MemoryParams(self.p, self.q)
        if int(self.replications) < 1:
            raise ValueError("replications must be >= 1")
        if int(self.n) < 2:
            raise ValueError("n must be >= 2")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0,1]")
        object.__setattr__(self, "checkpoints", tuple(int(c) for c in self.checkpoints))

    @property
    def params(self) -> MemoryParams:
        return MemoryParams(self.p, self.q)

    def stream(self, r: int) -> RngStream:
        return RngStream(self.seed, stream_index(self.experiment, r))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoints"] = list(self.checkpoints)
        return d


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: list[str]
    records: list[tuple]
    summary: dict
    histogram: dict | None = None
    table: dict | None = None  # extra per-n table (interval widths)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([rec[j] for rec in self.records], dtype=float)


def _metadata(config: ExperimentConfig) -> dict:
    return {"version": __version__, "config": config.to_dict(), "seed": config.seed}


def _replicate(fn, config: ExperimentConfig, workers: int | None) -> list:
    idx = range(config.replications)
    workers = workers or os.cpu_count() or 1
    if workers <= 1:
        return [fn(config, r) for r in idx]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda r: fn(config, r), idx, chunksize=1))


def _report(config: ExperimentConfig, r: int) -> EstimateReport:
    path = simulate_walk(config.params, config.n, config.stream(r))
    return EstimateReport.from_state(EstimatorState.from_path(path))


def histogram(values: np.ndarray) -> dict:
    """Fixed-width histogram on [-4, 4]; out-of-range values counted separately."""
    lo, hi = HIST_RANGE
    edges = np.round(np.arange(lo, hi + HIST_WIDTH / 2, HIST_WIDTH), 10)
    inside = values[(values >= lo) & (values <= hi)]
    counts, _ = np.histogram(inside, bins=edges)
    return {"edges": edges.tolist(), "counts": counts.tolist(),
            "underflow": int(np.sum(values < lo)), "overflow": int(np.sum(values > hi))}


def ks_normal(values: np.ndarray) -> float:
    return float(stats.kstest(values, "norm").statistic)


# --- normality ---------------------------------------------------------------

NORMALITY_COLUMNS = ["r", "p_hat", "v_n", "z"]


def _normality_rep(config, r):
    rep = _report(config, r)
    return (r, rep.p_hat, rep.v_n, math.sqrt(rep.v_n) * (rep.p_hat - config.p))


def summarize_normality(config: ExperimentConfig, records: list[tuple]) -> dict:
    z = np.array([rec[3] for rec in records])
    p_hat = np.array([rec[1] for rec in records])
    return {
        "replications": len(records),
        "mean_z": float(np.mean(z)),
        "var_z": float(np.var(z, ddof=1)) if len(z) > 1 else 0.0,
        "ks_distance": ks_normal(z),
        "mean_p_hat": float(np.mean(p_hat)),
        # no CLT at p = 3/4, so the KS distance carries no claim there
        "clt_applies": config.p != 0.75,
    }


def run_normality(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Distribution of sqrt(V_n) (p_hat - p) across replications."""
    records = _replicate(_normality_rep, config, workers)
    z = np.array([rec[3] for rec in records])
    return ExperimentResult(config, NORMALITY_COLUMNS, records, summarize_normality(config, records),
                            histogram=histogram(z), meta=_metadata(config))


# --- interval comparison -----------------------------------------------------

CI_N_MAX = 100


def _widths(k: np.ndarray, p_hat: np.ndarray, v: np.ndarray, alpha: float) -> dict:
    """Half-widths of I (sqrt(V_n) form), I (log n form), J, K, A for each prefix length."""
    t = inf.two_sided_normal(alpha)
    log_inv = inf._log_inv(alpha)
    kk = k.astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        diff = np.where(p_hat <= 0.75, np.sqrt(np.clip(3 - 4 * p_hat, 0, None)) * t / (2 * np.sqrt(np.log(kk))),
                        np.nan)
        j = np.sqrt(12.0 * kk * log_inv) / v
        return {
            "I": t / np.sqrt(v),
            "I_diffusive": diff,
            "J": j,
            "K": np.sqrt(29.0 / 3.0 * kk * log_inv) / v,
            "A": np.where(kk >= 3, np.sqrt(32.0 * kk * log_inv) / v, np.nan),
        }


def _ci_rep(config, r):
    n = min(config.n, CI_N_MAX)
    path = simulate_walk(config.params, n, config.stream(r))
    k, p_hat, v = running_estimates(path)
    return k, p_hat, v, _widths(k, p_hat, v, config.alpha)


def run_ci_comparison(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Interval half-widths for n = 2 .. min(n, 100): replication 0 alone and the replication mean."""
    reps = _replicate(_ci_rep, config, workers)
    k = reps[0][0]
    names = ["I", "I_diffusive", "J", "K", "A"]
    table = {"n": k.tolist()}
    for name in names:
        table[f"single_{name}"] = reps[0][3][name].tolist()
    for name in names:
        stacked = np.vstack([rep[3][name] for rep in reps])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns (A at n = 2)
            table[f"mean_{name}"] = np.nanmean(stacked, axis=0).tolist()
    records = [(r, float(rep[1][-1]), float(rep[2][-1])) for r, rep in enumerate(reps)]
    single = {name: np.array(table[f"single_{name}"]) for name in names}
    ge3 = np.array(table["n"]) >= 3
    ordered = bool(np.all(single["I"][ge3] < single["J"][ge3]) and np.all(single["J"][ge3] < single["A"][ge3]))
    summary = {"replications": len(records), "n_max": int(k[-1]), "ordering_I_J_A_single": ordered,
               "covered_J_single": bool(np.all(np.abs(reps[0][1] - config.p) <= single["J"]))}
    return ExperimentResult(config, ["r", "p_hat", "v_n"], records, summary, table=table,
                            meta=_metadata(config))


# --- coverage ----------------------------------------------------------------

COVERAGE_METHODS = inf.METHODS


def _coverage_rep(config, r):
    rep = _report(config, r)
    row = [r, rep.p_hat, rep.v_n]
    for ci in inf.all_intervals(rep, config.alpha):
        row += [int(ci.valid), int(ci.contains(config.p))]
    return tuple(row)


def _coverage_columns():
    cols = ["r", "p_hat", "v_n"]
    for m in COVERAGE_METHODS:
        cols += [f"{m}:valid", f"{m}:covered"]
    return cols


def summarize_coverage(config: ExperimentConfig, records: list[tuple]) -> dict:
    cols = _coverage_columns()
    out = {"replications": len(records)}
    for m in COVERAGE_METHODS:
        valid = np.array([rec[cols.index(f"{m}:valid")] for rec in records])
        cov = np.array([rec[cols.index(f"{m}:covered")] for rec in records])
        nv = int(valid.sum())
        rate = float(cov.sum() / nv) if nv else math.nan
        se = math.sqrt(rate * (1 - rate) / nv) if nv else math.nan
        out[m] = {"valid": nv, "coverage": rate, "stderr": se}
    return out


def run_coverage(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    if config.n < 3:
        raise ValueError("coverage needs n >= 3 (Azuma interval)")
    records = _replicate(_coverage_rep, config, workers)
    return ExperimentResult(config, _coverage_columns(), records, summarize_coverage(config, records),
                            meta=_metadata(config))


# --- test size and power -----------------------------------------------------

TEST_COLUMNS = ["r", "p_hat", "v_n", "chi2_stat", "reject_p0", "regime_stat",
                "reject_vs_diffusive", "reject_vs_superdiffusive"]


def _test_rep(config, r, table):
    rep = _report(config, r)
    t0 = inf.test_memory_equals(rep, config.p0, config.alpha)
    row = [r, rep.p_hat, rep.v_n, t0.statistic, int(t0.reject)]
    if table is not None and rep.n >= 3:
        t1 = inf.test_critical_vs_diffusive(rep, table, config.alpha)
        t2 = inf.test_critical_vs_superdiffusive(rep, table, config.alpha)
        row += [t1.statistic, int(t1.reject), int(t2.reject)]
    else:
        row += [math.nan, -1, -1]
    return tuple(row)


def summarize_tests(config: ExperimentConfig, records: list[tuple]) -> dict:
    def rate(j):
        vals = np.array([rec[j] for rec in records])
        vals = vals[vals >= 0]
        return float(vals.mean()) if vals.size else math.nan

    return {"replications": len(records), "p0": config.p0,
            "rejection_rate_p0": rate(4),
            "rejection_rate_vs_diffusive": rate(6),
            "rejection_rate_vs_superdiffusive": rate(7)}


def run_test_size_power(config: ExperimentConfig, workers: int | None = None,
                        table: QuantileTable | None = None) -> ExperimentResult:
    """Rejection rates of the p = p0 test and, given a Lambda table, of both regime tests."""
    records = _replicate(lambda c, r: _test_rep(c, r, table), config, workers)
    meta = _metadata(config)
    if table is not None:
        meta["quantile_table"] = table.provenance()
    return ExperimentResult(config, TEST_COLUMNS, records, summarize_tests(config, records), meta=meta)


# --- V_n limit laws ------------------------------------------------------------


def default_checkpoints(n: int) -> tuple[int, ...]:
    pts = [10**j for j in range(1, 20) if 10**j < n]
    return tuple(pts + [n])


def vn_scale(p: float, n: float) -> float:
    """Normalizer of V_n in the regime of ``p``: log n, (log n)^2 or n^(4p-3)."""
    if p < 0.75:
        return math.log(n)
    if p == 0.75:
        return math.log(n) ** 2
    return n ** (4 * p - 3)


def vn_target(p: float) -> float | None:
    """Limit of V_n / scale: 4/(3-4p), 4 E[Lambda] = 2 in mean, or None (random 4L^2/(4p-3))."""
    if p < 0.75:
        return 4.0 / (3.0 - 4.0 * p)
    if p == 0.75:
        return 2.0
    return None


def _vn_rep(config, r):
    path = simulate_walk(config.params, config.n, config.stream(r))
    cps = np.array(config.checkpoints or default_checkpoints(config.n), dtype=np.int64)
    v = 4.0 * _kernels.sq_sum_at(path.positions, cps)
    return (r,) + tuple(float(vi / vn_scale(config.p, c)) for vi, c in zip(v, cps))


def summarize_vn(config: ExperimentConfig, records: list[tuple]) -> dict:
    cps = config.checkpoints or default_checkpoints(config.n)
    target = vn_target(config.p)
    rows = []
    for j, c in enumerate(cps, start=1):
        vals = np.array([rec[j] for rec in records])
        mean = float(np.mean(vals))
        rows.append({"n": int(c), "mean": mean,
                     "p01": float(np.percentile(vals, 1)),
                     "rel_error": None if target is None else abs(mean - target) / target})
    return {"replications": len(records), "target": target, "checkpoints": rows}


def run_vn_limits(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Normalized V_n across replications on a grid of path lengths."""
    cps = config.checkpoints or default_checkpoints(config.n)
    if any(c < 2 or c > config.n for c in cps) or list(cps) != sorted(set(cps)):
        raise ValueError("checkpoints must be increasing values in [2, n]")
    records = _replicate(_vn_rep, config, workers)
    cols = ["r"] + [f"vn_scaled_{c}" for c in cps]
    return ExperimentResult(config, cols, records, summarize_vn(config, records), meta=_metadata(config))


RUNNERS = {
    "normality": run_normality,
    "ci-comparison": run_ci_comparison,
    "coverage": run_coverage,
    "test-size-power": run_test_size_power,
    "vn-limits": run_vn_limits,
}

SUMMARIZERS = {
    "normality": summarize_normality,
    "coverage": summarize_coverage,
    "test-size-power": summarize_tests,
    "vn-limits": summarize_vn,
}


def run_experiment(config: ExperimentConfig, workers: int | None = None, **kwargs) -> ExperimentResult:
    return RUNNERS[config.experiment](config, workers=workers, **kwargs)


# --- output ----------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def records_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    buf.write(f"# erwstat {result.meta.get('version', __version__)}\n")
    buf.write(f"# config={json.dumps(result.config.to_dict(), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for rec in result.records:
        w.writerow([_fmt(v) for v in rec])
    return buf.getvalue()


def read_records_csv(text: str) -> tuple[list[str], list[tuple]]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    cols = rows[0]
    recs = []
    for row in rows[1:]:
        recs.append(tuple(int(v) if v.lstrip("-").isdigit() else float(v) for v in row))
    return cols, recs


def table_csv(result: ExperimentResult) -> str:
    cols = list(result.table)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in zip(*(result.table[c] for c in cols)):
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def histogram_dat(hist: dict) -> str:
    lines = ["# bin_center count"]
    edges = hist["edges"]
    for lo, hi, c in zip(edges, edges[1:], hist["counts"]):
        lines.append(f"{(lo + hi) / 2:.10g} {c}")
    lines.append(f"# underflow {hist['underflow']} overflow {hist['overflow']}")
    return "\n".join(lines) + "\n"


def summary_json(result: ExperimentResult) -> str:
    payload = {"meta": result.meta, "summary": result.summary}
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(result: ExperimentResult, directory: str) -> list[str]:
    tag = result.config.experiment
    written = []
    targets = [(f"{tag}_records.csv", records_csv(result)), (f"{tag}_summary.json", summary_json(result))]
    if result.histogram is not None:
        targets.append((f"{tag}_histogram.dat", histogram_dat(result.histogram)))
    if result.table is not None:
        targets.append((f"{tag}_widths.csv", table_csv(result)))
    for name, text in targets:
        out = os.path.join(directory, name)
        atomic_write(out, text)
        written.append(out)
    return written
