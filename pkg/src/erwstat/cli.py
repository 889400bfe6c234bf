"""Command-line interface.

Exit codes: 0 success, 2 usage or malformed input, 3 unusable data,
4 configuration (e.g. a missing quantile table level).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from . import inference as inf
from .errors import ConfigurationError, DomainError, InsufficientDataError, PathFormatError
from .estimator import EstimateReport, estimate, running_estimates_csv
from .experiments import EXPERIMENTS, ExperimentConfig, atomic_write, run_experiment, summary_json, write_outputs
from .lambda_dist import DEFAULT_SAMPLES, DEFAULT_TRUNCATION, LambdaSampler, generate_table, lambda_quantile, load_table
from .pathio import path_from_bytes, path_from_csv, path_to_bytes, path_to_csv
from .rng import RngStream
from .walk import MemoryParams, simulate_walk

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONFIG = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _probability(name):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number") from None
        if not 0.0 <= value <= 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie in [0,1]")
        return value
    return parse


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def read_config_file(path: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _resolved(args) -> dict:
    skip = {"func", "config", "output"}  # where a result lands is not needed to regenerate it
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _meta(args) -> dict:
    cfg = _resolved(args)
    return {"version": __version__, "config": cfg, "seed": cfg.get("seed")}


def _human(obj, indent=0) -> str:
    pad = "  " * indent
    lines = []
    for key, value in obj.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.append(_human(value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{pad}{key}:")
            for item in value:
                lines.append(_human(item, indent + 1))
                lines.append("")
        else:
            lines.append(f"{pad}{key}: {value}")
    return "\n".join(lines)


def _emit(args, payload: dict | None = None, text: str | None = None, data: bytes | None = None):
    if payload is not None:
        text = _human(payload) + "\n" if args.format == "human" else json.dumps(payload, indent=2) + "\n"
    if data is not None:
        if not args.output:
            raise UsageError("binary output needs --output")
        with open(args.output, "wb") as fh:
            fh.write(data)
        return
    if args.output:
        atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


def _load_path(source: str):
    if source == "-":
        raw = sys.stdin.buffer.read()
    else:
        try:
            with open(source, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {source}: {exc}") from None
    if raw.startswith(b"ERW1"):
        return path_from_bytes(raw)
    return path_from_csv(raw.decode("utf-8"))


def _report_from_args(args) -> EstimateReport:
    if args.input:
        return estimate(_load_path(args.input))
    if args.p_hat is None or args.v_n is None or args.n is None:
        raise UsageError("give --input or all of --p-hat, --v-n, --n")
    if args.n < 2 or args.v_n < 4:
        raise InsufficientDataError("need n >= 2 and V_n >= 4")
    return EstimateReport(args.p_hat, args.v_n, args.n)


# --- subcommands -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    params = MemoryParams(args.p, args.q)
    path = simulate_walk(params, args.n, RngStream(args.seed, (args.index,)))
    meta = _meta(args)
    if args.format == "binary":
        _emit(args, data=path_to_bytes(path))
    elif args.format == "csv":
        flat = {"version": meta["version"], **{k: v for k, v in meta["config"].items()}}
        _emit(args, text=path_to_csv(path, flat))
    else:
        _emit(args, {"meta": meta, "steps": path.steps.tolist(), "positions": path.positions.tolist()})
    return EXIT_OK


def cmd_estimate(args) -> int:
    path = _load_path(args.input)
    report = estimate(path)
    if args.trace:
        atomic_write(args.trace, running_estimates_csv(path))
    if args.format == "csv":
        d = report.to_dict()
        _emit(args, text=",".join(d) + "\n" + ",".join(repr(v) for v in d.values()) + "\n")
    else:
        _emit(args, {"meta": _meta(args), "estimate": report.to_dict()})
    return EXIT_OK


def cmd_ci(args) -> int:
    report = _report_from_args(args)
    cis = inf.all_intervals(report, args.alpha)
    _emit(args, {"meta": _meta(args), "estimate": report.to_dict(),
                 "intervals": [ci.to_dict() | {"half_width": ci.half_width} for ci in cis]})
    return EXIT_OK


def cmd_test(args) -> int:
    report = _report_from_args(args)
    payload = {"meta": _meta(args), "estimate": report.to_dict()}
    if args.kind == "memory-equals-p0":
        if args.p0 is None:
            raise UsageError("--p0 is required for memory-equals-p0")
        outcome = inf.test_memory_equals(report, args.p0, args.alpha)
    else:
        table = load_table(args.table)
        payload["quantile_table"] = table.provenance()
        fn = (inf.test_critical_vs_diffusive if args.kind == "critical-vs-diffusive"
              else inf.test_critical_vs_superdiffusive)
        outcome = fn(report, table, args.alpha)
    payload["test"] = outcome.to_dict()
    _emit(args, payload)
    return EXIT_OK


def cmd_lambda_quantile(args) -> int:
    rng = RngStream(args.seed, (0x4C414D42,))
    if args.write_table:
        table = generate_table(samples=args.samples, seed=args.seed, truncation=args.truncation,
                               workers=args.threads)
        atomic_write(args.write_table, table.to_json())
        if args.level is None and args.alpha is None:
            return EXIT_OK
    if (args.level is None) == (args.alpha is None):
        raise UsageError("give exactly one of --level (CDF level) or --alpha (upper-tail level)")
    # the regime tests write lambda_alpha for the (1 - alpha)-quantile
    level = args.level if args.level is not None else 1.0 - args.alpha
    est = lambda_quantile(level, args.samples, rng, LambdaSampler(args.truncation), workers=args.threads)
    _emit(args, {"meta": _meta(args), "level": est.level, "quantile": est.quantile, "stderr": est.stderr})
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = ExperimentConfig(args.kind, args.p, args.n, args.replications, seed=args.seed, q=args.q,
                              alpha=args.alpha, p0=args.p0)
    kwargs = {}
    if args.kind == "test-size-power":
        kwargs["table"] = load_table(args.table)
    result = run_experiment(config, workers=args.threads, **kwargs)
    result.meta["threads"] = args.threads
    if args.output_dir:
        written = write_outputs(result, args.output_dir)
        sys.stdout.write("\n".join(written) + "\n")
    else:
        sys.stdout.write(summary_json(result))
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def _common(sp, formats=("json", "human")):
    sp.add_argument("--format", choices=formats, default=formats[0])
    sp.add_argument("--output", help="write here (atomically) instead of stdout")
    sp.add_argument("--config", help="flat key=value file supplying defaults")


def _report_inputs(sp):
    sp.add_argument("--input", help="path file (CSV or ERW1 binary); '-' for stdin")
    sp.add_argument("--p-hat", type=float)
    sp.add_argument("--v-n", type=float)
    sp.add_argument("--n", type=int)
    sp.add_argument("--alpha", type=_probability("alpha"), default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erwstat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"erwstat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate one walk")
    sp.add_argument("--p", type=_probability("p"), required=True)
    sp.add_argument("--q", type=_probability("q"), default=0.5)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--index", type=int, default=0, help="stream index")
    _common(sp, ("csv", "json", "human", "binary"))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("estimate", help="estimate p from a path file")
    sp.add_argument("--input", default="-")
    sp.add_argument("--trace", help="also write running estimates (k,p_hat,v_n) CSV here")
    _common(sp, ("json", "csv", "human"))
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("ci", help="all applicable confidence intervals")
    _report_inputs(sp)
    _common(sp)
    sp.set_defaults(func=cmd_ci)

    sp = sub.add_parser("test", help="hypothesis tests on the memory parameter")
    _report_inputs(sp)
    sp.add_argument("--kind", required=True,
                    choices=["memory-equals-p0", "critical-vs-diffusive", "critical-vs-superdiffusive"])
    sp.add_argument("--p0", type=float)
    sp.add_argument("--table", help="quantile table JSON (default: shipped table)")
    _common(sp)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("lambda-quantile", help="Monte Carlo quantiles of int_0^1 B_t^2 dt")
    sp.add_argument("--level", type=float, help="CDF level")
    sp.add_argument("--alpha", type=float, help="upper-tail level: returns the (1-alpha)-quantile")
    sp.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    sp.add_argument("--truncation", type=int, default=DEFAULT_TRUNCATION)
    sp.add_argument("--seed", type=int, default=20210301)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--write-table", help="regenerate the full quantile table into this file")
    _common(sp)
    sp.set_defaults(func=cmd_lambda_quantile)

    sp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    sp.add_argument("--kind", choices=EXPERIMENTS, required=True)
    sp.add_argument("--p", type=_probability("p"), required=True)
    sp.add_argument("--q", type=_probability("q"), default=0.5)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--replications", type=_positive_int, default=3000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha", type=_probability("alpha"), default=0.05)
    sp.add_argument("--p0", type=float, default=0.5)
    sp.add_argument("--threads", type=_positive_int, default=None)
    sp.add_argument("--table")
    sp.add_argument("--output-dir")
    sp.add_argument("--config", help="flat key=value file supplying defaults")
    sp.set_defaults(func=cmd_experiment)
    return parser


def _apply_config_file(parser, argv):
    """Install defaults from ``--config FILE`` on the chosen subcommand."""
    if "--config" not in argv:
        return
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a file")
    values = read_config_file(argv[i + 1])
    command = argv[0]
    sub = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in known or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {command}")
        action = known[key]
        try:
            defaults[key] = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"config {key}: {exc}") from None
        action.required = False
    sub.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if argv and not argv[0].startswith("-"):
            _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, PathFormatError, DomainError) as exc:
        print(f"erwstat: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientDataError as exc:
        print(f"erwstat: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigurationError as exc:
        print(f"erwstat: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"erwstat: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
