"""Command-line interface.

Subcommands: ball, walk-occupation, exit-time, wsf-volume, bounds, fit,
validate. Shared flags: --seed, --workers, --out, --format {csv,json},
and --config FILE with flat key=value lines (same keys as the flags;
explicit flags win). Group descriptors follow the grammar in
:mod:`cayleylab.groups`: Z, Z^d, H3, LL, Fk, joined with x for products.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import acceptance
from .bounds import (BoundParams, ExponentialVolume, PolynomialVolume,
                     TabulatedVolume, occupation_split, wsf_split)
from .errors import CayleyLabError, InputError
from .groups import parse_group
from .harness import (ExperimentConfig, fit_exponent, format_value,
                      load_config_file, rows_to_csv, run_experiment,
                      wide_wsf_rows)
from .metric import build_ball
from .stats import EstimateRecord
from .walk import make_step_distribution
from .wsf import build_wired_ball


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--workers", type=int, default=1)
    sub.add_argument("--out", type=str, default=None,
                     help="output file (directory for validate); default stdout")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--config", type=str, default=None,
                     help="flat key=value file providing flag defaults")


def _radii(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise InputError(f"bad radii list: {text!r}") from None


def _emit(rows: list[dict], columns: Sequence[str], args) -> None:
    if args.format == "json":
        text = json.dumps({"rows": rows}, sort_keys=True, default=float) + "\n"
    else:
        text = rows_to_csv(rows, columns)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _walk_rows(records: list[EstimateRecord]) -> list[dict]:
    return [{"r": rec.r, "trials": rec.trials, "mean": rec.mean,
             "sem": rec.sem, "truncated_fraction": rec.truncated_fraction}
            for rec in records]


def _parse_params(text: Optional[str]) -> BoundParams:
    params = BoundParams()
    if not text:
        return params
    fields = {"c": "c", "cprime": "c_prime", "cdprime": "c_dprime",
              "k": "k", "alpha": "alpha", "cdiff": "c_diff"}
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        key, _, value = tok.partition("=")
        key = key.strip().lower()
        if key not in fields:
            raise InputError(f"unknown bound parameter {key!r}")
        setattr(params, fields[key], int(value) if key == "k" else float(value))
    params.validate()
    return params


def _volume_from_args(args):
    if args.volume:
        spec = args.volume.strip()
        if spec.startswith("r^"):
            return PolynomialVolume(float(spec[2:]))
        if spec.startswith("expbase:"):
            return ExponentialVolume(float(spec.split(":", 1)[1]))
        raise InputError(f"bad volume spec {spec!r}; use r^D or expbase:B")
    if args.group:
        model = parse_group(args.group)
        return TabulatedVolume(build_ball(model, args.rmax))
    raise InputError("bounds needs either --volume or --group")


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _apply_config_file(argv)
    parser = argparse.ArgumentParser(
        prog="cayleylab",
        description="Random walks and wired spanning forests on Cayley graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ball", help="ball growth profile from BFS")
    p.add_argument("--group", required=True)
    p.add_argument("--rmax", type=int, required=True)
    _add_common(p)

    p = sub.add_parser("walk-occupation", help="occupation time of B(o,r)")
    p.add_argument("--group", required=True)
    p.add_argument("--radii", type=_radii, required=True)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--lazy", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--escape-factor", type=float, default=8.0)
    p.add_argument("--horizon", type=int, default=10_000_000)
    _add_common(p)

    p = sub.add_parser("exit-time", help="first exit time of B(o,r)")
    p.add_argument("--group", required=True)
    p.add_argument("--radii", type=_radii, required=True)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--lazy", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--horizon", type=int, default=10_000_000)
    _add_common(p)

    p = sub.add_parser("wsf-volume", help="WSF component sizes in B(o,r)")
    p.add_argument("--group", required=True)
    p.add_argument("--radii", type=_radii, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--wired-factor", type=int, default=2)
    _add_common(p)

    p = sub.add_parser("bounds", help="evaluate the split-sum bounds")
    p.add_argument("--volume", type=str, default=None,
                   help='analytic volume: "r^D" or "expbase:B"')
    p.add_argument("--group", type=str, default=None,
                   help="tabulate the volume of this group instead")
    p.add_argument("--rmax", type=int, default=12,
                   help="tabulation radius when --group is given")
    p.add_argument("--radii", type=_radii, required=True)
    p.add_argument("--params", type=str, default=None,
                   help="comma list c=,cprime=,cdprime=,k=,alpha=,cdiff=")
    p.add_argument("--kind", choices=("occupation", "wsf"), default="occupation")
    p.add_argument("--plain-split", action="store_true",
                   help="split at alpha r^2 (polynomial-growth variant)")
    _add_common(p)

    p = sub.add_parser("fit", help="log-log exponent fit of a results CSV")
    p.add_argument("--input", required=True, help="CSV with r, mean, sem columns")
    p.add_argument("--min-r", type=int, default=2)
    p.add_argument("--weighted", action="store_true")
    _add_common(p)

    p = sub.add_parser("validate", help="run the acceptance battery")
    p.add_argument("--quick", action="store_true",
                   help="scaled-down smoke battery (not acceptance evidence)")
    p.add_argument("--checks", type=str, default=None,
                   help="comma list of check names to run")
    _add_common(p)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except CayleyLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _apply_config_file(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        return argv  # argparse will report the missing value
    path = argv[at + 1]
    rest = argv[:at] + argv[at + 2:]
    if not rest:
        return argv
    injected = []
    for key, value in load_config_file(path).items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            injected.append(flag if value.lower() == "true"
                            else "--no-" + flag[2:])
        else:
            injected.extend([flag, value])
    return rest[:1] + injected + rest[1:]


def _dispatch(args) -> int:
    if args.command == "ball":
        model = parse_group(args.group)
        oracle = build_ball(model, args.rmax)
        rows = [{"r": r, "sphere_size": oracle.sphere_sizes[r],
                 "volume": oracle.volume(r)} for r in range(args.rmax + 1)]
        _emit(rows, ("r", "sphere_size", "volume"), args)
        return 0

    if args.command in ("walk-occupation", "exit-time"):
        observable = "occupation" if args.command == "walk-occupation" else "exit"
        config = ExperimentConfig(
            group=args.group, observable=observable, radii=args.radii,
            trials=args.trials, seed=args.seed, lazy=args.lazy,
            escape_factor=getattr(args, "escape_factor", 8.0),
            horizon=args.horizon, workers=args.workers)
        records = run_experiment(config)
        _emit(_walk_rows(records),
              ("r", "trials", "mean", "sem", "truncated_fraction"), args)
        return 0

    if args.command == "wsf-volume":
        config = ExperimentConfig(
            group=args.group, observable="wsf_volume", radii=args.radii,
            trials=args.trials, seed=args.seed,
            wired_factor=args.wired_factor, workers=args.workers)
        records = run_experiment(config)
        _emit(wide_wsf_rows(records),
              ("r", "trials", "mean_T", "sem_T", "mean_C", "sem_C",
               "mean_Nr", "sem_Nr"), args)
        return 0

    if args.command == "bounds":
        volume = _volume_from_args(args)
        params = _parse_params(args.params)
        split_at_log = not args.plain_split
        rows = []
        if args.kind == "occupation":
            for r in args.radii:
                res = occupation_split(r, volume, params, split_at_log)
                rows.append({"r": r, "split_point": res.split_point,
                             "sigma1_bound": res.prefix_bound,
                             "sigma2_value": res.tail_value,
                             "total": res.total})
            _emit(rows, ("r", "split_point", "sigma1_bound", "sigma2_value",
                         "total"), args)
        else:
            for r in args.radii:
                res = wsf_split(r, volume, params, split_at_log)
                rows.append({"r": r, "split_point": res.split_point,
                             "sigma3_bound": res.prefix_bound,
                             "sigma4_value": res.tail_value,
                             "total": res.total})
            _emit(rows, ("r", "split_point", "sigma3_bound", "sigma4_value",
                         "total"), args)
        return 0

    if args.command == "fit":
        records = _read_fit_records(args.input)
        fit = fit_exponent(records, min_r=args.min_r, weighted=args.weighted)
        rows = [{"slope": fit.slope, "intercept": fit.intercept,
                 "slope_se": fit.slope_se, "r_squared": fit.r_squared,
                 "n_points": fit.n_points}]
        _emit(rows, ("slope", "intercept", "slope_se", "r_squared",
                     "n_points"), args)
        return 0

    if args.command == "validate":
        names = args.checks.split(",") if args.checks else None
        results = acceptance.run_all(seed=args.seed, quick=args.quick,
                                     workers=args.workers, names=names)
        out_dir = args.out or "cayleylab-validate"
        os.makedirs(out_dir, exist_ok=True)
        report_lines = [res.report_line() for res in results]
        for res in results:
            check_dir = os.path.join(out_dir, res.name)
            os.makedirs(check_dir, exist_ok=True)
            for fname, text in res.artifacts.items():
                with open(os.path.join(check_dir, fname), "w",
                          encoding="utf-8") as fh:
                    fh.write(text)
        report = "\n".join(report_lines) + "\n"
        with open(os.path.join(out_dir, "report.txt"), "w",
                  encoding="utf-8") as fh:
            fh.write(report)
        sys.stdout.write(report)
        return 0 if all(res.passed for res in results) else 1

    raise InputError(f"unknown command {args.command!r}")


def _read_fit_records(path: str) -> list[EstimateRecord]:
    import csv as csv_mod
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv_mod.DictReader(fh):
            mean = float(row["mean"])
            sem = float(row.get("sem", 0.0) or 0.0)
            records.append(EstimateRecord(
                label=row.get("label", ""), r=int(row["r"]),
                trials=int(row.get("trials", 0) or 0), mean=mean, sem=sem,
                ci_low=mean - 1.96 * sem, ci_high=mean + 1.96 * sem))
    return records


if __name__ == "__main__":
    sys.exit(main())
