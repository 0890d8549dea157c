"""Command-line entry point: ``bench run ...`` and ``bench table ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import (
    AllRepsFailed,
    ExperimentConfig,
    emit_curves,
    emit_report,
    run_experiment,
    run_grid,
)
from .errors import ParseError, SchemaError, StratificationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _noise(text: str) -> tuple[str, float]:
    kind, sep, rate = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("expected <symmetric|asymmetric>:<rate>")
    try:
        return kind, float(rate)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad noise rate {rate!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV path, synthetic:n,dim,sep or banana:n,spread")
    p.add_argument("--noise", type=_noise, default=("symmetric", 0.0), help="kind:rate, e.g. asymmetric:0.3")
    p.add_argument("--noise-class", type=int, choices=(-1, 1), default=1,
                   help="class whose labels asymmetric noise flips")
    p.add_argument("--rounds", type=int, default=150)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--subsample", type=float, default=0.8, help="per-round LR subsample fraction")
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--label-column", type=int, default=-1)
    p.add_argument("--positive-token", default="1")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--jobs", type=int, default=1, help="parallel repetitions")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Label-noise boosting experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one configuration, repeated")
    _common(run)
    run.add_argument("--booster", choices=("adaboost", "rboost"), default="rboost")
    run.add_argument("--learner", choices=("lr", "rlr"), default="rlr")
    run.add_argument("--gamma", default="identity",
                     help="identity | fixed | fixed:g01,g10 | estimate | trusted[:k]")
    run.add_argument("--curves", action="store_true", help="record per-round train/test error")
    run.add_argument("--curves-file", help="where to write the curves CSV (default: stderr)")

    table = sub.add_parser("table", help="the six booster/learner/gamma cells on one dataset")
    _common(table)
    return parser


def _config(args, **extra) -> ExperimentConfig:
    kind, rate = args.noise
    return ExperimentConfig(
        data=args.data,
        noise_kind=kind,
        noise_rate=rate,
        noise_class=args.noise_class,
        rounds=args.rounds,
        reps=args.reps,
        base_seed=args.seed,
        train_fraction=args.train_frac,
        subsample_fraction=args.subsample,
        label_column=args.label_column,
        positive_token=args.positive_token,
        header=args.header,
        **extra,
    )


def _write(text: str, path: str | None, stream) -> None:
    if path:
        Path(path).write_text(text)
    else:
        stream.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "run":
            cfg = _config(args, booster=args.booster, learner=args.learner,
                          gamma=args.gamma, curves=args.curves)
            table = run_experiment(cfg, jobs=args.jobs)
        else:
            table = run_grid(_config(args), jobs=args.jobs)
            if not table.rows:
                raise AllRepsFailed("every configuration failed")
    except AllRepsFailed as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except (ValueError, OSError, ParseError, SchemaError, StratificationError) as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _write(emit_report(table, args.format), args.out, sys.stdout)
    if args.command == "run" and args.curves:
        _write(emit_curves(table), args.curves_file, sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
