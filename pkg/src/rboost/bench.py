"""Repeated noisy-label experiments and mean ± std error reports.

A repetition splits the data (stratified), optionally carves a small clean
trusted set from the held-out part, injects label noise into the training
part only, builds an ensemble and measures its error on the clean test part.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .boosting import BoostConfig, Ensemble, GammaMode, run_adaboost, run_rboost
from .dataset import (
    Dataset,
    FlipMatrix,
    NoiseSpec,
    generate_banana,
    generate_two_gaussians,
    holdout,
    inject_label_noise,
    load_csv,
    split,
)
from .robust_lr import FitConfig, plain_lr_config

log = logging.getLogger(__name__)

COLUMNS = ("dataset", "noise_kind", "rate", "booster", "learner", "gamma_mode", "mean", "std", "reps")
DEFAULT_TRUSTED_SIZE = 20


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of a results table.

    ``data`` is a CSV path, ``synthetic:n,dim,sep`` (two Gaussians) or
    ``banana:n,spread``. ``gamma`` is one of
    ``identity``, ``fixed`` (the injected flip matrix), ``fixed:g01,g10``,
    ``estimate`` or ``trusted[:k]``.
    """

    data: str
    noise_kind: str = "symmetric"
    noise_rate: float = 0.0
    booster: str = "rboost"
    learner: str = "rlr"
    gamma: str = "identity"
    rounds: int = 150
    reps: int = 10
    base_seed: int = 0
    train_fraction: float = 0.8
    subsample_fraction: float = 0.8
    noise_class: int = 1
    curves: bool = False
    label_column: int = -1
    positive_token: str = "1"
    header: bool = False

    def __post_init__(self):
        NoiseSpec(self.noise_kind, self.noise_rate, 0, self.noise_class)
        if self.booster not in ("adaboost", "rboost"):
            raise ValueError(f"unknown booster {self.booster!r}")
        if self.learner not in ("lr", "rlr"):
            raise ValueError(f"unknown learner {self.learner!r}")
        if self.rounds < 1 or self.reps < 1:
            raise ValueError("rounds and reps must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train fraction must be in (0, 1)")
        kind, _ = self.gamma_spec
        if self.booster == "adaboost" and kind != "identity":
            raise ValueError("AdaBoost only supports gamma 'identity'")
        if self.data.startswith(("synthetic:", "banana:")):
            _synthetic_args(self.data)

    @property
    def gamma_spec(self) -> tuple[str, tuple]:
        kind, _, arg = self.gamma.partition(":")
        if kind in ("identity", "estimate") and not arg:
            return kind, ()
        if kind == "fixed":
            if not arg:
                return kind, ()
            parts = arg.split(",")
            if len(parts) == 2:
                g01, g10 = (float(v) for v in parts)
                FlipMatrix.from_offdiag(g01, g10)
                return kind, (g01, g10)
        if kind == "trusted":
            k = int(arg) if arg else DEFAULT_TRUSTED_SIZE
            if k < 4:
                raise ValueError("trusted set needs at least 4 samples")
            return kind, (k,)
        raise ValueError(f"bad gamma spec {self.gamma!r}")

    @property
    def gamma_label(self) -> str:
        return self.gamma if self.booster == "rboost" else "identity"


def _synthetic_args(spec: str):
    kind, _, rest = spec.partition(":")
    try:
        if kind == "synthetic":
            n, dim, sep = rest.split(",")
            return int(n), int(dim), float(sep)
        n, spread = rest.split(",")
        return int(n), float(spread)
    except ValueError:
        form = "synthetic:n,dim,sep" if kind == "synthetic" else "banana:n,spread"
        raise ValueError(f"expected {form!r}, got {spec!r}") from None


def load_data(cfg: ExperimentConfig) -> Dataset:
    """Generated data uses ``base_seed``, so every repetition sees the same sample."""
    if cfg.data.startswith("synthetic:"):
        n, dim, sep = _synthetic_args(cfg.data)
        data = generate_two_gaussians(n, dim, sep, cfg.base_seed)
        return replace(data, name=f"synthetic-n{n}-d{dim}-s{sep:g}")
    if cfg.data.startswith("banana:"):
        n, spread = _synthetic_args(cfg.data)
        data = generate_banana(n, spread, cfg.base_seed)
        return replace(data, name=f"banana-n{n}-s{spread:g}")
    return load_csv(cfg.data, cfg.label_column, cfg.positive_token, header=cfg.header)


@dataclass(frozen=True)
class RepResult:
    rep: int
    error: float
    train_curve: tuple = ()
    test_curve: tuple = ()


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    noise_kind: str
    rate: float
    booster: str
    learner: str
    gamma_mode: str
    per_rep_errors: tuple
    failed_reps: tuple = ()
    curves: tuple = field(default=(), repr=False)

    @property
    def mean(self) -> float:
        return summarize(self.per_rep_errors)[0]

    @property
    def std(self) -> float:
        return summarize(self.per_rep_errors)[1]

    @property
    def reps(self) -> int:
        return len(self.per_rep_errors)


@dataclass(frozen=True)
class ResultTable:
    rows: tuple = ()

    def __add__(self, other: ResultTable) -> ResultTable:
        return ResultTable(self.rows + other.rows)


def summarize(per_rep_errors) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (n - 1 denominator)."""
    x = np.asarray(per_rep_errors, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot summarise an empty sequence")
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return mean, std


def _learner_config(cfg: ExperimentConfig) -> FitConfig:
    if cfg.learner == "lr":
        return plain_lr_config(subsample_fraction=cfg.subsample_fraction)
    return FitConfig(subsample_fraction=cfg.subsample_fraction)


def _error_pct(pred, labels) -> float:
    return 100.0 * float(np.mean(pred != labels))


def run_rep(cfg: ExperimentConfig, data: Dataset, rep: int) -> RepResult:
    """One repetition with seed ``base_seed + rep``."""
    s_split, s_noise, s_boost, s_trusted = (
        int(v) for v in np.random.SeedSequence(cfg.base_seed + rep).generate_state(4)
    )
    train, test = split(data, cfg.train_fraction, s_split)
    kind, args = cfg.gamma_spec
    trusted = None
    if cfg.booster == "rboost" and kind == "trusted":
        trusted, test = holdout(test, args[0], s_trusted)

    noise = NoiseSpec(cfg.noise_kind, cfg.noise_rate, s_noise, cfg.noise_class)
    noisy = inject_label_noise(train, noise)

    if kind == "identity" or cfg.booster == "adaboost":
        mode = GammaMode.identity()
    elif kind == "fixed":
        mode = GammaMode.fixed(FlipMatrix.from_offdiag(*args) if args else noise.flip_matrix())
    elif kind == "estimate":
        mode = GammaMode.estimate()
    else:
        mode = GammaMode.with_trusted(trusted)

    bcfg = BoostConfig(cfg.rounds, mode, learner=_learner_config(cfg), seed=s_boost)
    ens: Ensemble = (run_adaboost if cfg.booster == "adaboost" else run_rboost)(noisy, bcfg)

    error = _error_pct(ens.predict(test.features), test.labels)
    if not cfg.curves:
        return RepResult(rep, error)
    train_scores = ens.staged_decision_function(noisy.features)
    test_scores = ens.staged_decision_function(test.features)
    train_curve = tuple(_error_pct(np.where(h >= 0, 1, -1), noisy.labels) for h in train_scores)
    test_curve = tuple(_error_pct(np.where(h >= 0, 1, -1), test.labels) for h in test_scores)
    return RepResult(rep, error, train_curve, test_curve)


def _safe_rep(cfg: ExperimentConfig, rep: int) -> RepResult | None:
    try:
        return run_rep(cfg, _cached_data(cfg), rep)
    except Exception as exc:  # a failed repetition is reported, not fatal
        log.warning("repetition %d failed: %s: %s", rep, type(exc).__name__, exc)
        return None


@lru_cache(maxsize=8)
def _cached_data(cfg: ExperimentConfig) -> Dataset:
    return load_data(replace(cfg, gamma="identity", booster="rboost", learner="rlr"))


class AllRepsFailed(RuntimeError):
    pass


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ResultTable:
    """Run ``cfg.reps`` repetitions and aggregate them into a one-row table."""
    data = load_data(cfg)
    reps = range(1, cfg.reps + 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_rep, [cfg] * cfg.reps, reps))
    else:
        results = []
        for r in reps:
            try:
                results.append(run_rep(cfg, data, r))
            except Exception as exc:  # a failed repetition is reported, not fatal
                log.warning("repetition %d failed: %s: %s", r, type(exc).__name__, exc)
                results.append(None)

    ok = sorted((res for res in results if res is not None), key=lambda res: res.rep)
    failed = tuple(r for r, res in zip(reps, results) if res is None)
    if not ok:
        raise AllRepsFailed(f"all {cfg.reps} repetitions failed")
    row = ResultRow(
        dataset=data.name,
        noise_kind=cfg.noise_kind,
        rate=cfg.noise_rate,
        booster=cfg.booster,
        learner=cfg.learner,
        gamma_mode=cfg.gamma_label,
        per_rep_errors=tuple(res.error for res in ok),
        failed_reps=failed,
        curves=tuple(res for res in ok) if cfg.curves else (),
    )
    return ResultTable((row,))


PAPER_CONFIGS = (
    ("adaboost", "lr", "identity"),
    ("adaboost", "rlr", "identity"),
    ("rboost", "lr", "fixed"),
    ("rboost", "rlr", "fixed"),
    ("rboost", "lr", "estimate"),
    ("rboost", "rlr", "estimate"),
)


def run_grid(base: ExperimentConfig, configs=PAPER_CONFIGS, jobs: int = 1) -> ResultTable:
    """Run several (booster, learner, gamma) cells on otherwise identical settings."""
    table = ResultTable()
    for booster, learner, gamma in configs:
        cell = replace(base, booster=booster, learner=learner, gamma=gamma)
        try:
            table = table + run_experiment(cell, jobs)
        except AllRepsFailed as exc:
            log.warning("%s+%s (%s): %s", booster, learner, gamma, exc)
    return table


def _g17(x: float) -> str:
    return "%.17g" % x


def emit_report(table: ResultTable, fmt: str = "csv") -> str:
    """Render a table as machine-exact CSV or as a markdown table."""
    if not table.rows:
        raise ValueError("empty result table")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in table.rows:
            writer.writerow([
                r.dataset, r.noise_kind, _g17(r.rate), r.booster, r.learner,
                r.gamma_mode, _g17(r.mean), _g17(r.std), r.reps,
            ])
        return buf.getvalue()
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(COLUMNS[:6]) + " | error (%) | reps |",
            "|" + "---|" * 6 + "---:|---:|",
        ]
        for r in table.rows:
            lines.append(
                f"| {r.dataset} | {r.noise_kind} | {r.rate * 100:g}% | {r.booster} | {r.learner} "
                f"| {r.gamma_mode} | {r.mean:.2f} ± {r.std:.2f} | {r.reps} |"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_curves(table: ResultTable) -> str:
    """Per-round train (noisy labels) and clean-test error, one CSV line per round."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", "booster", "learner", "gamma_mode", "rep", "round", "train_error", "test_error"])
    for row in table.rows:
        for res in row.curves:
            for t, (tr, te) in enumerate(zip(res.train_curve, res.test_curve), start=1):
                writer.writerow([row.dataset, row.booster, row.learner, row.gamma_mode,
                                 res.rep, t, _g17(tr), _g17(te)])
    return buf.getvalue()


def parse_report(text: str) -> list[dict]:
    """Read back a CSV report; numeric columns become floats/ints."""
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        rec["rate"], rec["mean"], rec["std"] = (float(rec[k]) for k in ("rate", "mean", "std"))
        rec["reps"] = int(rec["reps"])
        out.append(rec)
    return out


def first_round_within(curve, tol: float) -> int:
    """1-based first round whose value is within ``tol`` of the final value."""
    final = curve[-1]
    for t, v in enumerate(curve, start=1):
        if math.fabs(v - final) <= tol:
            return t
    return len(curve)
