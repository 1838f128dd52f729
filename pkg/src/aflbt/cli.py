"""Command-line entry point.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .btcore import BTError
from .evaluate import PredictionOutcome, metrics_report
from .experiments import (
    STRATEGIES,
    FeatureCache,
    WindowSpec,
    run_covariate_experiment,
    run_outcome_experiment,
    run_round_experiment,
    windows,
)
from .features import ENCODINGS, MissingLadder, MissingPrevLadder
from .ingest import IngestError, load_dataset_dir, write_dataset
from .synth import SynthSpec, generate_games

log = logging.getLogger("aflbt")

PREDICTION_COLUMNS = ("game_id", "p_home", "predicted_home_win", "actual_home_win", "is_final", "strategy")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _seasons(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aflbt", description="Bradley-Terry models for AFL match data.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out=True):
        sp.add_argument("--data", type=Path, required=True, help="directory with the five input CSVs")
        if out:
            sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("validate", help="load and validate a data directory")
    common(sp, out=False)

    sp = sub.add_parser("synth", help="write a synthetic data directory")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--seasons", default="2015-2017", help="e.g. 2015-2017 or 2015,2016")
    sp.add_argument("--rounds", type=int, default=23, help="home-and-away rounds per season")
    sp.add_argument("--delta", type=float, default=0.3, help="home advantage on the logit scale")
    sp.add_argument("--no-finals", action="store_true")

    for name, help_ in (("fit", "fit one model and write it as JSON"),
                        ("predict", "fit on --train and predict the following season")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--train", required=True)
        sp.add_argument("--home-effect", action="store_true")
        sp.add_argument("--encoding", choices=ENCODINGS, help="fit the covariate model instead of team strengths")
        sp.add_argument("--interactions", action="store_true")

    sp = sub.add_parser("experiment", help="run one of the four experiments")
    sp.add_argument("experiment", choices=("e1", "e2", "e3", "e4"))
    common(sp)
    sp.add_argument("--train", help="first training season(s); default sweeps every window")
    sp.add_argument("--window", default="1", help="1..4 or 'all'")
    sp.add_argument("--encoding", choices=ENCODINGS)
    sp.add_argument("--strategy", choices=STRATEGIES + ("all",), default="all")
    sp.add_argument("--home-effect", action="store_true", help="same as running e2")
    sp.add_argument("--interactions", action="store_true")

    sp = sub.add_parser("report", help="metrics for a predictions CSV")
    common(sp)
    sp.add_argument("--predictions", type=Path, required=True)
    return p


# --- writers ---------------------------------------------------------------


def _write_rows(path: Path, rows: list, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    else:
        with path.open("w", newline="", encoding="utf-8") as fh:
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
    return path


def _write_fit(out: Path, name: str, fit) -> None:
    d = out / "fits"
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{name}.json").write_text(fit.to_json(indent=2) + "\n", encoding="utf-8")


def _write_predictions(path: Path, outcomes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for o in outcomes:
            w.writerow([o.game_id, repr(o.p_home), int(o.predicted_home_win), int(o.actual_home_win),
                        int(o.is_final), o.strategy])


def _read_predictions(path: Path) -> list:
    with path.open(newline="", encoding="utf-8") as fh:
        return [
            PredictionOutcome(r["game_id"], float(r["p_home"]), r["predicted_home_win"] == "1",
                              r["actual_home_win"] == "1", r["is_final"] == "1", r["strategy"])
            for r in csv.DictReader(fh)
        ]


# --- commands --------------------------------------------------------------


def _train_window(dataset, text):
    seasons = _seasons(text)
    test = seasons[-1] + 1
    return WindowSpec(tuple(seasons), test if test in dataset.seasons else None)


def cmd_validate(args):
    ds = load_dataset_dir(args.data)
    n_draws = sum(g.is_draw for g in ds.games)
    print(f"ok: {len(ds.games)} games ({n_draws} draws) in seasons {ds.seasons}")
    return 0


def cmd_synth(args):
    spec = SynthSpec(home_effect=args.delta, seasons=tuple(_seasons(args.seasons)),
                     rounds_per_season=args.rounds, finals=not args.no_finals, seed=args.seed)
    ds = generate_games(spec)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds.games)} games to {args.out}")
    return 0


def _fit_model(args, ds):
    window = _train_window(ds, args.train)
    if args.encoding:
        cache = FeatureCache(ds, args.interactions)
        report = run_covariate_experiment(ds, window, args.encoding, cache)
        name = f"ts-tv_{args.encoding}_{window.label}"
    else:
        report = run_outcome_experiment(ds, window, args.home_effect)
        name = f"{report.model}_{window.label}"
    return report, name


def cmd_fit(args):
    ds = load_dataset_dir(args.data)
    report, name = _fit_model(args, ds)
    _write_fit(args.out, name, report.fit)
    _write_rows(args.out / f"report_fit_{name}", [report.to_row()], args.format)
    print(report.fit.to_json(indent=2))
    return 0


def cmd_predict(args):
    ds = load_dataset_dir(args.data)
    report, name = _fit_model(args, ds)
    if report.test_season is None:
        raise UsageError(f"no season after {args.train} in the data")
    path = args.out / f"predictions_{name}.csv"
    _write_predictions(path, report.outcomes)
    print(f"wrote {len(report.outcomes)} predictions to {path}")
    return 0


def _windows_for(ds, args):
    if args.train:
        seasons = _seasons(args.train)
        if args.window not in ("1", "all") or len(seasons) == 1:
            size = len(ds.seasons) if args.window == "all" else int(args.window)
            seasons = list(range(seasons[0], seasons[0] + size))
        test = seasons[-1] + 1
        return [WindowSpec(tuple(seasons), test if test in ds.seasons else None)]
    return windows(ds.seasons, args.window)


def cmd_experiment(args):
    ds = load_dataset_dir(args.data)
    exp = "e2" if args.experiment == "e1" and args.home_effect else args.experiment
    if exp in ("e1", "e2") and args.encoding:
        raise UsageError("--encoding applies to e3 and e4 only")
    if exp in ("e3", "e4") and not args.encoding:
        raise UsageError(f"{exp} needs --encoding")
    reports = []
    if exp in ("e1", "e2"):
        for w in _windows_for(ds, args):
            reports.append(run_outcome_experiment(ds, w, exp == "e2"))
    elif exp == "e3":
        cache = FeatureCache(ds, args.interactions)
        for w in _windows_for(ds, args):
            reports.append(run_covariate_experiment(ds, w, args.encoding, cache))
    else:
        cache = FeatureCache(ds, args.interactions)
        strategies = STRATEGIES if args.strategy == "all" else (args.strategy,)
        if args.window != "1":
            raise UsageError("e4 uses single-season windows")
        for w in _windows_for(ds, args):
            if w.test_season is None:
                continue
            reports += run_round_experiment(ds, w.train_seasons[0], w.test_season, args.encoding,
                                            strategies, cache)
    if not reports:
        raise UsageError("no window with data to run")
    if args.train:
        label = reports[0].window
    else:
        label = "all" if args.window == "all" else f"w{args.window}"
    args.out.mkdir(parents=True, exist_ok=True)
    for r in reports:
        if r.fit is not None:
            suffix = f"_{r.encoding}" if r.encoding else ""
            _write_fit(args.out, f"{exp}_{r.window}_{r.model}{suffix}", r.fit)
        if exp == "e4":
            _write_predictions(args.out / f"predictions_e4_{r.window}_{r.encoding}_{r.strategy}.csv", r.outcomes)
    path = _write_rows(args.out / f"report_{exp}_{label}", [r.to_row() for r in reports], args.format)
    for r in reports:
        acc = "-" if r.test_accuracy is None else f"{100 * r.test_accuracy:.2f}%"
        print(f"{exp} {r.window:>9} {r.strategy:<12} test acc {acc}")
    print(f"report: {path}")
    return 0


def cmd_report(args):
    ds = load_dataset_dir(args.data)
    outcomes = _read_predictions(args.predictions)
    m = metrics_report(outcomes, ds)
    row = {
        "predictions": args.predictions.name,
        "n_games": m.n_games,
        "accuracy": round(m.accuracy, 6),
        "finals_correct": m.finals_correct,
        "finals_total": m.finals_total,
    }
    if args.format == "json":
        row["per_team_accuracy"] = m.per_team_accuracy
    else:
        row["per_team_accuracy"] = ";".join(f"{t}={v:.6f}" for t, v in m.per_team_accuracy.items())
    path = _write_rows(args.out / f"report_{args.predictions.stem}", [row], args.format)
    print(f"accuracy {100 * m.accuracy:.2f}% over {m.n_games} games; finals {m.finals_correct}/{m.finals_total}")
    print(f"report: {path}")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "synth": cmd_synth,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BTError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (IngestError, MissingLadder, MissingPrevLadder, ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1


def main():  # pragma: no cover
    sys.exit(run_command())
