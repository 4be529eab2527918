"""Command-line front end.

Every output file starts with a metadata record holding the resolved
parameters; ``randbell rerun FILE`` replays them and reproduces the data
byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from randbell import __version__
from randbell.checks import run_checks
from randbell.core import InvalidInputError
from randbell.experiments import (
    FIXED_M,
    MODES,
    THREADS_ENV,
    ConfigError,
    CountsConfig,
    DeviceConfig,
    ExperimentConfig,
    Histogram,
    TrialTable,
    ViolationCurve,
    distribution_histogram,
    run_trials,
    violation_curve_vs_m,
    violation_curve_vs_visibility,
)
from randbell.statistics import (
    LAB_ACCIDENTAL_RATE,
    NoiseModel,
    ShiftedBound,
    violation_probability,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

TRIAL_COLUMNS = ["trial", "chsh", "xA", "xA2", "yB", "yB2", "minus_pos", "violated", "chsh_err"]
CURVE_COLUMNS = ["axis", "probability", "stderr"]
HIST_COLUMNS = ["bin_start", "bin_end", "count"]

DEFAULT_RESAMPLES = 1000
META_PREFIX = "# randbell-meta "


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _num(x: float) -> str:
    return format(float(x), ".12g")


def _rate(text: str) -> float:
    if text == "lab":
        return LAB_ACCIDENTAL_RATE
    return float(text)


def _grid(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _add_common(p: argparse.ArgumentParser, trials: int, modes: Sequence[str] | None, default_mode: str | None) -> None:
    p.add_argument("--trials", type=int, default=trials, help=f"number of Bell tests (default {trials})")
    p.add_argument("--visibility", type=float, default=1.0, help="Werner-state visibility V (default 1.0)")
    p.add_argument("--delta", type=float, default=0.0, help="shift of the classical bound, S = 2 + delta (default 0)")
    p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed; trial t uses stream t (default 0)")
    if modes:
        p.add_argument("--mode", choices=modes, default=default_mode, help=f"measurement settings (default {default_mode})")
        p.add_argument("--m", type=int, default=None, help="settings per party (default 5 for random/voltages; fixed by triads and unbiased-pairs)")
    p.add_argument("--counts-rate", type=float, default=None,
                   help="coincidence rate in Hz; enables finite-counts mode (default off: exact correlators)")
    p.add_argument("--duration", type=float, default=1.0, help="counting time per setting pair in s (default 1.0)")
    p.add_argument("--accidental-rate", type=_rate, default=0.0,
                   help=f"accidental coincidences per outcome pair in Hz, or 'lab' for {LAB_ACCIDENTAL_RATE:.4g} (default 0)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--corrected", dest="corrected", action="store_true", default=True,
                   help="subtract delayed-window accidentals (default)")
    g.add_argument("--raw", dest="corrected", action="store_false", help="analyse raw coincidence counts")
    p.add_argument("--vmax", type=float, default=7.0, help="voltage range [0, vmax] in voltages mode (default 7)")
    p.add_argument("--beta", type=float, default=0.15, help="centre of the heater beta band, rad/V^2 (default 0.15)")
    p.add_argument("--beta-spread", type=float, default=0.02, help="half-width of the beta band (default 0.02)")
    p.add_argument("--out", default=None, help="output file (default: data to stdout, summary to stderr)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default csv)")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${THREADS_ENV} or min(8, cpus))")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randbell", description="CHSH violations with randomly chosen measurements.")
    parser.add_argument("--version", action="version", version=f"randbell {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("triads", help="random measurement triads, one row per trial")
    _add_common(p, 100, None, None)
    p.add_argument("--resamples", type=int, default=None,
                   help=f"Poisson resamples for CHSH error bars in counts mode (default {DEFAULT_RESAMPLES}; 0 disables)")

    p = sub.add_parser("random", help="completely random settings, one row per trial")
    _add_common(p, 100, ["random", "voltages", "unbiased-pairs"], "random")
    p.add_argument("--resamples", type=int, default=None,
                   help=f"Poisson resamples for CHSH error bars in counts mode (default {DEFAULT_RESAMPLES}; 0 disables)")

    p = sub.add_parser("curve", help="violation probability versus visibility or m")
    _add_common(p, 100_000, list(MODES), "random")
    p.add_argument("--axis", choices=("visibility", "m"), default="visibility", help="swept quantity (default visibility)")
    p.add_argument("--grid", type=_grid, default=None,
                   help="comma-separated grid (default: the single --visibility value, or m = 2..8)")

    p = sub.add_parser("hist", help="binned distribution of maximal CHSH values")
    _add_common(p, 100_000, list(MODES), "triads")
    p.add_argument("--bin-width", type=float, default=0.02, help="bin width (default 0.02)")

    p = sub.add_parser("check", help="run the invariant suite")
    p.add_argument("--size", type=int, default=1000, help="sample size per check (default 1000)")

    p = sub.add_parser("rerun", help="reproduce an output file from its metadata")
    p.add_argument("file", help="CSV or JSON file written by randbell")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=None)
    return parser


# -- parameters <-> argv ------------------------------------------------------

_PARAM_FLAGS = [
    ("trials", "--trials"), ("visibility", "--visibility"), ("delta", "--delta"), ("seed", "--seed"),
    ("mode", "--mode"), ("m", "--m"), ("counts_rate", "--counts-rate"), ("duration", "--duration"),
    ("accidental_rate", "--accidental-rate"), ("vmax", "--vmax"), ("beta", "--beta"),
    ("beta_spread", "--beta-spread"), ("resamples", "--resamples"), ("axis", "--axis"),
    ("grid", "--grid"), ("bin_width", "--bin-width"),
]


def resolve_params(args: argparse.Namespace) -> dict[str, Any]:
    """Fill in mode-dependent defaults; the result fully determines the data."""
    cmd = args.command
    mode = "triads" if cmd == "triads" else args.mode
    m = args.m if cmd != "triads" else None
    if m is None:
        m = FIXED_M.get(mode, 5)
    params: dict[str, Any] = {
        "trials": args.trials, "visibility": args.visibility, "delta": args.delta, "seed": args.seed,
        "mode": mode, "m": m, "counts_rate": args.counts_rate, "duration": args.duration,
        "accidental_rate": args.accidental_rate, "corrected": args.corrected,
        "vmax": args.vmax, "beta": args.beta, "beta_spread": args.beta_spread,
    }
    if cmd in ("triads", "random"):
        res = args.resamples
        if res is None:
            res = DEFAULT_RESAMPLES if args.counts_rate is not None else 0
        params["resamples"] = res
    if cmd == "curve":
        params["axis"] = args.axis
        grid = args.grid
        if grid is None:
            grid = [args.visibility] if args.axis == "visibility" else [2, 3, 4, 5, 6, 7, 8]
        params["grid"] = grid
    if cmd == "hist":
        params["bin_width"] = args.bin_width
    return params


def params_to_argv(command: str, params: dict[str, Any]) -> list[str]:
    argv = [command]
    for key, flag in _PARAM_FLAGS:
        if key not in params or params[key] is None:
            continue
        if command == "triads" and key in ("mode", "m"):
            continue
        v = params[key]
        argv += [flag, ",".join(repr(g) for g in v) if key == "grid" else repr(v) if isinstance(v, float) else str(v)]
    argv.append("--corrected" if params.get("corrected", True) else "--raw")
    return argv


def config_from_params(params: dict[str, Any]) -> ExperimentConfig:
    counts = None
    if params["counts_rate"] is not None:
        counts = CountsConfig(
            NoiseModel(params["counts_rate"], params["accidental_rate"]),
            params["duration"],
            params["corrected"],
            params.get("resamples", 0),
        )
    try:
        return ExperimentConfig(
            mode=params["mode"], m=params["m"], visibility=params["visibility"], trials=params["trials"],
            bound=ShiftedBound(params["delta"]), counts=counts, seed=params["seed"],
            device=DeviceConfig(params["vmax"], params["beta"], params["beta_spread"]),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None


# -- output ------------------------------------------------------------------

def trial_rows(table: TrialTable) -> list[list[Any]]:
    rows = []
    for i in range(len(table)):
        w = table.witness[i]
        err = table.errors[i]
        rows.append([i, float(table.values[i]), *(int(k) for k in w), int(table.values[i] > table.bound.bound),
                     None if math.isnan(err) else float(err)])
    return rows


def curve_rows(curve: ViolationCurve) -> list[list[Any]]:
    return [[float(a), float(p), float(s)] for a, p, s in zip(curve.axis, curve.probability, curve.stderr)]


def hist_rows(h: Histogram) -> list[list[Any]]:
    return [[float(h.edges[k]), float(h.edges[k + 1]), int(h.counts[k])] for k in range(len(h.counts))]


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return _num(v)
    return str(v)


def _json_value(v: Any) -> Any:
    return float(_num(v)) if isinstance(v, float) else v


def render(meta: dict[str, Any], columns: list[str], rows: list[list[Any]], fmt: str) -> str:
    if fmt == "json":
        doc = {"meta": meta, "rows": [{c: _json_value(v) for c, v in zip(columns, r)} for r in rows]}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(META_PREFIX + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_output(meta: dict[str, Any], columns: list[str], rows: list[list[Any]], path: str | None, fmt: str) -> None:
    """Write CSV or JSON to ``path``, or to stdout when ``path`` is None."""
    text = render(meta, columns, rows, fmt)
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_meta(path: str) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith(META_PREFIX):
            return json.loads(first[len(META_PREFIX):])
        fh.seek(0)
        return json.load(fh)["meta"]


# -- commands ----------------------------------------------------------------

def _summary_trials(cfg: ExperimentConfig, table: TrialTable) -> str:
    v = table.values
    p, se = violation_probability(v, cfg.bound)
    return (f"{cfg.mode} m={cfg.m} V={cfg.visibility:g} trials={len(v)}: mean CHSH {v.mean():.4f}, "
            f"min {v.min():.4f}, max {v.max():.4f}; {int(table.violated.sum())}/{len(v)} above S={cfg.bound.bound:g} "
            f"(p = {p:.4f} +- {se:.4f})")


def _execute(command: str, params: dict[str, Any], out: str | None, fmt: str, threads: int | None) -> int:
    cfg = config_from_params(params)
    meta = {"tool": "randbell", "version": __version__, "command": command, "params": params,
            "argv": params_to_argv(command, params)}
    if command in ("triads", "random"):
        table = run_trials(cfg, threads)
        columns, rows = TRIAL_COLUMNS, trial_rows(table)
        summary = [_summary_trials(cfg, table)]
    elif command == "curve":
        if params["axis"] == "visibility":
            curve = violation_curve_vs_visibility(cfg, params["grid"], threads)
        else:
            curve = violation_curve_vs_m(cfg, params["grid"], threads)
        columns, rows = CURVE_COLUMNS, curve_rows(curve)
        summary = [f"{cfg.mode} {curve.axis_name}={a:g}: P(CHSH > {cfg.bound.bound:g}) = {p:.4f} +- {s:.4f}"
                   for a, p, s in rows]
    else:
        values = run_trials(cfg, threads).values
        h = distribution_histogram(values, params["bin_width"])
        columns, rows = HIST_COLUMNS, hist_rows(h)
        mode_bin = int(np.argmax(h.counts))
        summary = [f"{cfg.mode} m={cfg.m} V={cfg.visibility:g} trials={len(values)}: mean {values.mean():.4f}, "
                   f"mode bin [{h.edges[mode_bin]:.3f}, {h.edges[mode_bin + 1]:.3f})"]
    write_output(meta, columns, rows, out, fmt)
    stream = sys.stderr if out is None else sys.stdout
    for line in summary:
        print(line, file=stream)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "check":
            return EXIT_OK if run_checks(args.size) else EXIT_RUNTIME
        if args.command == "rerun":
            meta = read_meta(args.file)
            fmt = args.format or ("json" if args.file.endswith(".json") else "csv")
            return _execute(meta["command"], meta["params"], args.out, fmt, args.threads)
        params = resolve_params(args)
        return _execute(args.command, params, args.out, args.format, args.threads)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, InvalidInputError) as exc:
        print(f"randbell: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:
        print(f"randbell: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
