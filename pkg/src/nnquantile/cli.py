"""Command-line interface: ``nnquantile {predict,backtest,synth,verify}``.

Exit codes: 0 ok, 1 usage, 2 data, 3 numeric failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .backtest import BacktestPlan, backtest, sweep_orders
from .estimators import METHODS, make_forecaster
from .exceptions import (
    DataError,
    NNQuantileError,
    NotIncreasing,
    ParseError,
    UsageError,
)
from .synth import ProcessSpec, generate
from .types import QuantileLevel, Series, validate_series

log = logging.getLogger("nnquantile")

METRIC_FIELDS = ("pinball", "ramp", "avg_abs", "avg_sqr", "mape_pct", "abs_std_dev")


def _read_lines(path):
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None


def load_series_file(path) -> Series:
    """One decimal per line; an optional first line starting with ``#`` is a header."""
    values = []
    for i, line in enumerate(_read_lines(path), start=1):
        text = line.strip()
        if i == 1 and text.startswith("#"):
            continue
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            raise ParseError(i, f"{path}: line {i}: not a number: {text!r}") from None
    return validate_series(values)


def load_dates_file(path) -> List[int]:
    """One strictly increasing 1-based integer per line."""
    dates = []
    for i, line in enumerate(_read_lines(path), start=1):
        text = line.strip()
        if not text or (i == 1 and text.startswith("#")):
            continue
        try:
            m = int(text)
        except ValueError:
            raise ParseError(i, f"{path}: line {i}: not an integer: {text!r}") from None
        if m < 1:
            raise ParseError(i, f"{path}: line {i}: dates are 1-based")
        if dates and m <= dates[-1]:
            raise NotIncreasing(f"{path}: line {i}: {m} does not exceed {dates[-1]}")
        dates.append(m)
    return dates


def write_series_file(path, series: Series, header: Optional[str] = None):
    lines = [f"# {header}"] if header else []
    lines.extend(repr(float(v)) for v in series.values)
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def report_table(rows, tau: float) -> str:
    """Two report tables, rounded to two decimals.

    ``rows`` is a list of ``(label, BacktestResult)``.
    """
    head1 = ("Method", f"PinBall Loss ({tau:g})", "Ramp Loss")
    head2 = ("Method", "Avg Abs Error", "Avg Sqr Error", "MAPE (%)", "Abs Std Dev")
    body1, body2 = [], []
    for label, res in rows:
        r = res.report
        if r is None:
            body1.append((label, "n/a", "n/a"))
            body2.append((label, "n/a", "n/a", "n/a", "n/a"))
            continue
        body1.append((label, f"{r.pinball:.2f}", f"{r.ramp:.2f}"))
        body2.append((label, f"{r.avg_abs:.2f}", f"{r.avg_sqr:.2f}", f"{r.mape_pct:.2f}", f"{r.abs_std_dev:.2f}"))

    def fmt(head, body):
        widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
        line = lambda cells: " | ".join(str(c).ljust(w) for c, w in zip(cells, widths))
        sep = "-+-".join("-" * w for w in widths)
        return "\n".join([line(head), sep] + [line(b) for b in body])

    return fmt(head1, body1) + "\n\n" + fmt(head2, body2)


def _parse_orders(text) -> Optional[List[int]]:
    if text is None:
        return None
    m = re.fullmatch(r"sweep:(\d+)\.\.(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if lo < 1 or hi < lo:
            raise UsageError(f"bad order sweep {text!r}")
        return list(range(lo, hi + 1))
    try:
        p = int(text)
    except ValueError:
        raise UsageError(f"order must be an integer or sweep:A..B, got {text!r}") from None
    if p < 1:
        raise UsageError("order must be positive")
    return [p]


def _forecaster_config(args):
    return dict(
        tau=args.tau.value,
        k_max=args.k_max,
        lbar_max=args.lbar_max,
        eta=args.eta,
        truncation=args.truncation,
        delta=args.delta,
        engine=args.engine,
        window=args.ma_window,
        period=args.season_length,
        season_length=args.season_length,
    )


def _config_echo(args):
    out = {}
    for k, v in vars(args).items():
        if k == "func":
            continue
        out[k] = v.value if isinstance(v, QuantileLevel) else v
    return out


def _emit(text: str, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _metrics_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["method", *METRIC_FIELDS, "n_points", "excluded_points", "mape_excluded"])
    for label, res in rows:
        r = res.report
        if r is None:
            w.writerow([label] + [""] * len(METRIC_FIELDS) + [0, res.excluded, 0])
            continue
        w.writerow(
            [label, *(repr(getattr(r, f)) for f in METRIC_FIELDS), r.n_points, r.excluded_points, r.mape_excluded]
        )
    return buf.getvalue()


def _metrics_json(rows, args, best=None) -> str:
    doc = {
        "config": _config_echo(args),
        "abs_std_dev_convention": "population",
        "results": [
            {
                "method": label,
                "params": {k: v for k, v in res.params.items() if not hasattr(v, "keys")},
                "metrics": res.report.as_dict() if res.report else None,
                "excluded_points": res.excluded,
                "records": [
                    {
                        "series": r.series_id,
                        "m": r.date,
                        "prediction": r.prediction,
                        "observed": r.observed,
                        "error": r.error,
                    }
                    for r in res.records
                ],
            }
            for label, res in rows
        ],
    }
    if best is not None:
        doc["best"] = best
    return json.dumps(doc, indent=2) + "\n"


def cmd_predict(args):
    methods = args.method.split(",")
    out_rows = []
    for path in args.input:
        ser = load_series_file(path)
        for name in methods:
            est = make_forecaster(name, order=_parse_orders(args.order or "1")[0], **_forecaster_config(args))
            pred = est.fit(ser.values).predict()
            out_rows.append({"input": str(path), "method": name, "step": len(ser) + 1, "prediction": pred})
    if args.format == "json":
        _emit(json.dumps({"config": _config_echo(args), "forecasts": out_rows}, indent=2) + "\n", args.output)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["input", "method", "step", "prediction"])
        for r in out_rows:
            w.writerow([r["input"], r["method"], r["step"], repr(r["prediction"])])
        _emit(buf.getvalue(), args.output)
    return 0


def cmd_backtest(args):
    series = {}
    for path in args.input:
        sid = Path(path).stem
        if sid in series:
            sid = str(path)
        series[sid] = load_series_file(path)
    dates = load_dates_file(args.dates)
    plan = BacktestPlan(series, dates, args.tau)
    rows, best = [], {}
    orders = _parse_orders(args.order)
    for name in args.method.split(","):
        cfg = _forecaster_config(args)
        est = make_forecaster(name, **cfg)
        if "order" in est.get_params():
            sweep = orders or [1]
            results, best_p = sweep_orders(plan, est, sweep)
            for p, res in results.items():
                rows.append((f"{name}({p})" + (" *" if len(sweep) > 1 and p == best_p else ""), res))
            if len(sweep) > 1:
                best[name] = best_p
        else:
            rows.append((name, backtest(plan, est)))
    print(report_table(rows, plan.tau.value))
    if any(res.excluded for _, res in rows):
        for label, res in rows:
            if res.excluded:
                print(f"{label}: {res.excluded} point(s) excluded after fit failures", file=sys.stderr)
    if args.output:
        text = _metrics_json(rows, args, best or None) if args.format == "json" else _metrics_csv(rows)
        _emit(text, args.output)
    return 0


def cmd_synth(args):
    amps = tuple(float(a) for a in args.amplitudes.split(",")) if args.amplitudes else ()
    spec = ProcessSpec(
        args.kind,
        args.length,
        seed=args.seed,
        mu=args.mu,
        sigma=args.sigma,
        phi=args.phi,
        period=args.season_length,
        amplitudes=amps,
    )
    header = f"{spec.kind} length={spec.length} seed={spec.seed}"
    write_series_file(args.output, generate(spec), header)
    return 0


def cmd_verify(args):
    from .verification.acceptance import run_all

    only = {int(x) for x in args.only.split(",")} if args.only else None
    results = run_all(only)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 4 if failed else 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _tau_arg(text):
    try:
        return QuantileLevel.of(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("model options")
    g.add_argument("--tau", type=_tau_arg, default=QuantileLevel.of("0.5"), help="quantile level in (0,1) (default 0.5)")
    g.add_argument("--k-max", type=int, default=14, help="largest window length k (default 14)")
    g.add_argument("--lbar-max", type=int, default=25, help="largest neighbour count (default 25)")
    g.add_argument("--eta", default="inv_sqrt", help="eta schedule: inv_sqrt (sqrt(1/n), default), inv_sqrt:S, constant:C")
    g.add_argument("--truncation", action="store_true", help="clamp expert outputs (off by default)")
    g.add_argument("--delta", type=float, default=0.2, help="truncation exponent in (0, 1/4) (default 0.2)")
    g.add_argument("--engine", choices=("incremental", "naive"), default="incremental")
    g.add_argument("--method", default="QuantileExpertMixture", help=f"comma-separated subset of: {', '.join(METHODS)}")
    g.add_argument("--order", default=None, help="AR/QAR order p, or sweep:1..10")
    g.add_argument("--ma-window", type=int, default=7, help="moving-average window (default 7)")
    g.add_argument("--season-length", type=int, default=7, help="season / weekday period (default 7)")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--output", "-o", default=None, help="output path ('-' for stdout)")

    parser = _Parser(prog="nnquantile", description="Sequential quantile forecasting with nearest-neighbour experts.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", parents=[common], help="one-step forecast for each input series")
    p.add_argument("input", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("backtest", parents=[common], help="fit on y_1..y_m, score y_{m+1} for every date")
    p.add_argument("input", nargs="+")
    p.add_argument("--dates", required=True, help="file with one prefix length m per line")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("synth", help="generate a seeded synthetic series")
    p.add_argument("--kind", choices=("iid_gaussian", "ar1", "seasonal"), default="ar1")
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--phi", type=float, default=0.6)
    p.add_argument("--season-length", type=int, default=7)
    p.add_argument("--amplitudes", default=None, help="comma-separated seasonal offsets")
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", default=None, help="comma-separated check numbers")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        return args.func(args)
    except NNQuantileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ArithmeticError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
