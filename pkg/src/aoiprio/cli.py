"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import analysis
from .closed_form import total_wq_age
from .errors import AoIError, InvalidConfig
from .models import Discipline, SystemConfig, shs_report
from .simulator import DEFAULT_SEED, SimConfig, simulate, write_replications_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
TABLE2_STREAMS = (3, 5, 8)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def emit_sweep_csv(points, sink) -> None:
    """Rows ``lambda,discipline,stream,age``: one per stream plus a ``total`` row per point."""
    points = list(points)
    if not points:
        raise InvalidConfig("no sweep points to write")
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["lambda", "discipline", "stream", "age"])
    for p in points:
        lam = f"{p.lam:.6g}"
        for k, age in enumerate(p.per_stream, start=1):
            writer.writerow([lam, p.discipline.value, k, repr(float(age))])
        writer.writerow([lam, p.discipline.value, "total", repr(p.total)])


def _disciplines(value: str) -> list[Discipline]:
    if value == "both":
        return [Discipline.WQ, Discipline.NQ]
    return [Discipline.parse(value)]


def _cmd_eval(args, out):
    cfg = SystemConfig(args.lam, args.mu, args.streams)
    disc = Discipline.parse(args.discipline)
    if disc is Discipline.WQ and args.method == "closed":
        report = total_wq_age(cfg)
    else:
        report = shs_report(cfg, disc)
    if args.format == "json":
        print(json.dumps(report.to_dict()), file=out)
    elif args.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["stream", "age"])
        for k, age in enumerate(report.per_stream, start=1):
            w.writerow([k, repr(age)])
        w.writerow(["total", repr(report.total)])
    else:
        print(f"N={cfg.streams} lambda={cfg.lam:g} mu={cfg.mu:g} discipline={disc.value}", file=out)
        for k, age in enumerate(report.per_stream, start=1):
            print(f"  stream {k:<3d} {age:.6f}", file=out)
        print(f"  total      {report.total:.6f}", file=out)


def _cmd_simulate(args, out):
    cfg = SimConfig(
        SystemConfig(args.lam, args.mu, args.streams), args.discipline, horizon=args.horizon,
        warmup_fraction=args.warmup, seed=args.seed, replications=args.replications, service=args.service,
    )
    est = simulate(cfg, workers=args.workers)
    if args.format == "json":
        print(json.dumps(est.to_dict()), file=out)
    elif args.format == "csv":
        write_replications_csv(est, out)
    else:
        print(f"N={args.streams} lambda={args.lam:g} mu={args.mu:g} discipline={cfg.discipline.value} "
              f"horizon={cfg.horizon:g} replications={cfg.replications} seed={cfg.seed}", file=out)
        for k, (age, se) in enumerate(zip(est.per_stream_age, est.stderr), start=1):
            print(f"  stream {k:<3d} {age:.6f} +- {se:.6f}", file=out)
        print(f"  total      {est.total_age:.6f}", file=out)
        if est.non_converged:
            print("  warning: stderr above 5% of the mean on some stream", file=out)


def _cmd_sweep(args, out):
    if args.points < 1:
        raise InvalidConfig("--points must be at least 1")
    if args.log:
        grid = np.geomspace(args.lambda_min, args.lambda_max, args.points)
    else:
        grid = np.linspace(args.lambda_min, args.lambda_max, args.points)
    points = []
    for disc in _disciplines(args.discipline):
        points += analysis.total_age_curve(args.streams, args.mu, grid, disc)
    if args.format == "json":
        rows = [{"lambda": p.lam, "discipline": p.discipline.value, "per_stream": list(p.per_stream),
                 "total": p.total} for p in points]
        print(json.dumps(rows), file=out)
    elif args.format == "table":
        for p in points:
            ages = " ".join(f"{a:12.6g}" for a in p.per_stream)
            print(f"{p.lam:10.6g} {p.discipline.value} {ages} | {p.total:12.6g}", file=out)
    else:
        emit_sweep_csv(points, out)


def _cmd_optimum(args, out):
    results = [analysis.find_optimum(args.streams, args.mu, d, (args.lo, args.hi), args.tol)
               for d in _disciplines(args.discipline)]
    if args.format == "table":
        for r in results:
            print(f"N={r.streams} {r.discipline.value}: lambda_opt={r.lambda_opt:.4f} age_opt={r.age_opt:.4f}", file=out)
    else:
        docs = [r.to_dict() for r in results]
        print(json.dumps(docs[0] if len(docs) == 1 else docs), file=out)


def _cmd_crossing(args, out):
    r = analysis.find_crossing(args.streams, args.mu, (args.lo, args.hi), args.tol)
    if args.format == "table":
        print(f"N={args.streams} lambda_pass={r.lambda_pass:.4f} bracket=({args.lo:g}, {args.hi:g})", file=out)
    else:
        print(json.dumps(r.to_dict()), file=out)


def table2_rows(mu: float = 1.0, streams=TABLE2_STREAMS, tol: float = analysis.DEFAULT_TOL) -> list[dict]:
    rows = []
    for n in streams:
        wq = analysis.find_optimum(n, mu, Discipline.WQ, tol=tol)
        nq = analysis.find_optimum(n, mu, Discipline.NQ, tol=tol)
        cross = analysis.find_crossing(n, mu, tol=tol)
        rows.append({
            "N": n,
            "age_opt_wq": wq.age_opt,
            "lambda_opt_wq": wq.lambda_opt,
            "age_opt_nq": nq.age_opt,
            "lambda_opt_nq": nq.lambda_opt,
            "lambda_pass": cross.lambda_pass,
        })
    return rows


def _cmd_table2(args, out):
    rows = table2_rows(args.mu, args.streams_list)
    if args.format == "json":
        print(json.dumps(rows), file=out)
    elif args.format == "csv":
        w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    else:
        print(f"{'N':>3} {'age_opt WQ':>11} {'lam_opt WQ':>11} {'age_opt NQ':>11} {'lam_opt NQ':>11} {'lam_pass':>9}",
              file=out)
        for r in rows:
            print(f"{r['N']:>3} {r['age_opt_wq']:11.4f} {r['lambda_opt_wq']:11.4f} {r['age_opt_nq']:11.4f} "
                  f"{r['lambda_opt_nq']:11.4f} {r['lambda_pass']:9.4f}", file=out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aoiprio", description="Average age of information for prioritised streams.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def system(sp, need_lambda=True):
        sp.add_argument("--N", dest="streams", type=int, required=True, help="number of streams")
        if need_lambda:
            sp.add_argument("--lambda", dest="lam", type=float, required=True, help="arrival rate per stream")
        sp.add_argument("--mu", type=float, default=1.0, help="service rate")

    def fmt(sp, default, choices=("table", "json", "csv")):
        sp.add_argument("--format", choices=choices, default=default)

    sp = sub.add_parser("eval", help="exact per-stream and total age")
    system(sp)
    sp.add_argument("--discipline", choices=("wq", "nq"), default="wq")
    sp.add_argument("--method", choices=("closed", "shs"), default="closed",
                    help="WQ engine; NQ always uses the SHS solver")
    fmt(sp, "table")
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("simulate", help="discrete-event estimate of per-stream age")
    system(sp)
    sp.add_argument("--discipline", choices=("wq", "nq"), default="wq")
    sp.add_argument("--horizon", type=float, default=1e5)
    sp.add_argument("--warmup", type=float, default=0.1, help="fraction of the horizon discarded")
    sp.add_argument("--replications", type=int, default=5)
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--service", choices=("resume", "restart"), default="resume")
    fmt(sp, "table")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("sweep", help="age curves over an arrival-rate grid")
    system(sp, need_lambda=False)
    sp.add_argument("--lambda-min", type=float, required=True)
    sp.add_argument("--lambda-max", type=float, required=True)
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--log", action="store_true", help="log-spaced grid")
    sp.add_argument("--discipline", choices=("wq", "nq", "both"), default="both")
    fmt(sp, "csv")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("optimum", help="arrival rate minimising total age")
    system(sp, need_lambda=False)
    sp.add_argument("--discipline", choices=("wq", "nq", "both"), default="wq")
    sp.add_argument("--lo", type=float, default=0.01)
    sp.add_argument("--hi", type=float, default=3.0)
    sp.add_argument("--tol", type=float, default=analysis.DEFAULT_TOL)
    fmt(sp, "json", ("table", "json"))
    sp.set_defaults(func=_cmd_optimum)

    sp = sub.add_parser("crossing", help="arrival rate where WQ and NQ total ages meet")
    system(sp, need_lambda=False)
    sp.add_argument("--lo", type=float, default=0.05)
    sp.add_argument("--hi", type=float, default=10.0)
    sp.add_argument("--tol", type=float, default=analysis.DEFAULT_TOL)
    fmt(sp, "json", ("table", "json"))
    sp.set_defaults(func=_cmd_crossing)

    sp = sub.add_parser("table2", help="optimum and crossing rates for N = 3, 5, 8")
    sp.add_argument("--mu", type=float, default=1.0)
    sp.add_argument("--N", dest="streams_list", type=int, nargs="+", default=list(TABLE2_STREAMS))
    fmt(sp, "table")
    sp.set_defaults(func=_cmd_table2)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except InvalidConfig as exc:
        print(f"error: InvalidConfig: {exc}", file=err)
        return EXIT_USAGE
    except AoIError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_NUMERIC
    return EXIT_OK


def entry() -> None:
    sys.exit(main())
