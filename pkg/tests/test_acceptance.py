"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python -m pytest -m acceptance``.
"""

import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from rboost.bench import ExperimentConfig, first_round_within, run_experiment
from rboost.boosting import (
    BoostConfig,
    GammaMode,
    SampleWeightTable,
    alpha_gradient,
    init_sample_weights,
    rboost_loss,
    run_rboost,
    solve_alpha,
    stepwise_loss,
    update_sample_weights,
)
from rboost.calibration import estimate_gamma, gamma_objective
from rboost.dataset import (
    Dataset,
    FlipMatrix,
    NoiseSpec,
    generate_two_gaussians,
    holdout,
    inject_label_noise,
    split,
)
from rboost.robust_lr import (
    FitConfig,
    RobustLinearModel,
    fit_robust_lr,
    log_likelihood_gradient,
    update_omega,
    weighted_log_likelihood,
)

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, started):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail}; {time.time() - started:.1f}s)"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def textbook_adaboost(data, rounds, learner, round_seeds):
    """Normalised-distribution AdaBoost, written independently of the library's boosters."""
    X, y = data.features, data.labels
    D = np.full(data.n, 1.0 / data.n)
    alphas = []
    for seed in round_seeds[:rounds]:
        h = fit_robust_lr(Dataset(X, y), D, replace(learner, seed=seed)).predict(X)
        err = D[h != y].sum()
        alpha = 0.5 * math.log((1 - err) / err)
        D = D * np.exp(-alpha * y * h)
        D = D / D.sum()
        alphas.append(alpha)
    return np.array(alphas)


def test_c1_adaboost_reduction(report):
    t0 = time.time()
    worst = 0.0
    learner = FitConfig(subsample_fraction=0.8)
    for seed in range(5):
        d = generate_two_gaussians(500, 2, 1.0, seed)
        d = inject_label_noise(d, NoiseSpec("symmetric", 0.1, 50 + seed))
        cfg = BoostConfig(rounds=10, gamma_mode=GammaMode.identity(), learner=learner, seed=seed)
        got = np.array(run_rboost(d, cfg).alphas)
        ref = textbook_adaboost(d, cfg.rounds, learner, cfg.round_seeds())
        worst = max(worst, float(np.max(np.abs(got - ref))))
    report(1, "rBoost with identity gamma reproduces AdaBoost alphas", worst <= 1e-6,
           f"max |Δα| = {worst:.2e} over 5 seeds", t0)


def test_c2_appendix_identity(report):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 40))
        y = rng.choice([-1, 1], n)
        table, H, scale = init_sample_weights(y), np.zeros(n), 0.0
        for _ in range(int(rng.integers(0, 6))):
            a, h = rng.normal(scale=0.7), rng.choice([-1, 1], n)
            table = update_sample_weights(table, h, y, a)
            H += a * h
            scale += a
        gamma = FlipMatrix.from_offdiag(*rng.uniform(0, 0.5, 2))
        h, alpha = rng.choice([-1, 1], n), rng.normal()
        direct = rboost_loss(H + alpha * h, gamma, y)
        exact = stepwise_loss(SampleWeightTable.from_scores(H, y), gamma, y, h, alpha)
        # incremental updates omit the common e^{-α} factor of every round
        running = stepwise_loss(table, gamma, y, h, alpha) * math.exp(-scale)
        worst = max(worst, abs(exact - direct), abs(running - direct))
    report(2, "stepwise loss equals direct expansion", worst <= 1e-10, f"max abs diff = {worst:.2e}", t0)


def test_c3_gradient(report):
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        X = rng.normal(size=(50, 5))
        y = rng.choice([-1, 1], 50)
        d = Dataset(X, y)
        omega = FlipMatrix.from_offdiag(*rng.uniform(0, 0.45, 2))
        model = RobustLinearModel(rng.normal(scale=0.7, size=6), omega)
        w = rng.uniform(0, 2, 50)
        g = log_likelihood_gradient(model, d, w)
        fd = np.empty(6)
        for k in range(6):
            e = np.zeros(6)
            e[k] = 1e-6
            fd[k] = (weighted_log_likelihood(RobustLinearModel(model.beta + e, omega), d, w)
                     - weighted_log_likelihood(RobustLinearModel(model.beta - e, omega), d, w)) / 2e-6
        worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(fd)))
    report(3, "analytic gradient matches central differences", worst < 1e-5, f"max rel err = {worst:.2e}", t0)


GRID = np.round(np.linspace(0.0, 1.0, 1001), 3)


def grid_argbest(score):
    """Evaluate ``score(p01, p10)`` (vectorised over p10) on the 1e-3 grid; return best point and value."""
    best, arg = -np.inf, None
    for p01 in GRID:
        vals = score(p01, GRID)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, arg = vals[j], (p01, GRID[j])
    return np.array(arg), best


def test_c4_multiplicative_optimality(report):
    t0 = time.time()
    rng = np.random.default_rng(4)
    ok, worst_w, worst_g = True, 0.0, 0.0
    for seed in range(3):
        d = generate_two_gaussians(100, 2, 2.0, seed)
        d = inject_label_noise(d, NoiseSpec("symmetric", 0.25, seed))
        w = rng.uniform(0.5, 1.5, d.n)
        beta = fit_robust_lr(d, w, FitConfig(freeze_omega=True)).beta
        model = RobustLinearModel(beta, FlipMatrix.from_offdiag(0.2, 0.2))
        for _ in range(20000):
            new = update_omega(model, d, w)
            done = np.max(np.abs(new.p - model.omega.p)) < 1e-14
            model = RobustLinearModel(beta, new)
            if done:
                break
        s = 1 / (1 + np.exp(-(d.features @ beta[:-1] + beta[-1])))
        t = d.labels == 1

        def loglik(p01, p10):
            p10 = p10[:, None]
            p1 = (1 - p10) * s + p01 * (1 - s)
            obs = np.where(t, p1, 1 - p1)
            with np.errstate(divide="ignore"):
                return np.log(obs) @ w

        arg, best = grid_argbest(loglik)
        got = np.array(model.omega.offdiag)
        worst_w = max(worst_w, float(np.max(np.abs(got - arg))))
        ok &= weighted_log_likelihood(model, d, w) >= best - 1e-9 and np.all(np.abs(got - arg) <= 1e-3)

        P = np.clip(s + rng.normal(scale=0.05, size=d.n), 0.01, 0.99)
        est = estimate_gamma(FlipMatrix.from_offdiag(0.2, 0.2), P, d.labels, tol=1e-14, max_sweeps=20000)

        def neg_loss(g01, g10):
            g10 = g10[:, None]
            p1 = (1 - g10) * P + g01 * (1 - P)
            obs = np.where(t, p1, 1 - p1)
            with np.errstate(divide="ignore"):
                return np.log(obs).sum(axis=1)

        arg, best = grid_argbest(neg_loss)
        got = np.array(est.gamma.offdiag)
        worst_g = max(worst_g, float(np.max(np.abs(got - arg))))
        ok &= -gamma_objective(est.gamma, P, d.labels) >= best - 1e-9 and np.all(np.abs(got - arg) <= 1e-3)
    report(4, "converged omega and gamma match 1e-3 grid optimum", bool(ok),
           f"max |Δω| = {worst_w:.1e}, max |Δγ| = {worst_g:.1e}", t0)


def test_c5_alpha_contract(report):
    t0 = time.time()
    rng = np.random.default_rng(5)
    worst_f = 0.0
    for _ in range(1000):
        A, B = rng.uniform(0.01, 5, 2)
        eps = rng.uniform(0, 1) * min(A, B)
        alpha = solve_alpha(eps, A, B)
        s = A + B
        worst_f = max(worst_f, abs(alpha_gradient(alpha, eps / s, A / s, B / s)))
    worst_cf = 0.0
    for _ in range(1000):
        A = rng.uniform(0.01, 5)
        eps = rng.uniform(0.01, 0.99) * A
        expected = 0.5 * math.log((A - eps) / eps)
        if abs(expected) < 10:
            worst_cf = max(worst_cf, abs(solve_alpha(eps, A, 0.0) - expected))
    clamps = solve_alpha(0.0, 1.0, 0.0) == 10.0 and solve_alpha(1.0, 1.0, 0.0) == -10.0
    ok = worst_f <= 1e-8 and worst_cf <= 1e-8 and clamps
    report(5, "alpha root, closed form and clamping", ok,
           f"max |f| = {worst_f:.1e}, max closed-form gap = {worst_cf:.1e}, clamps {clamps}", t0)


def test_c6_flip_rate_recovery(report):
    t0 = time.time()
    omegas, gammas = [], []
    for seed in range(10):
        d = generate_two_gaussians(2000, 2, 2.0, seed)
        noisy = inject_label_noise(d, NoiseSpec("symmetric", 0.3, 1000 + seed))
        omegas.append(fit_robust_lr(noisy).omega.offdiag)

        train, test = split(d, 0.8, seed)
        trusted, _ = holdout(test, 20, seed)
        train = inject_label_noise(train, NoiseSpec("symmetric", 0.3, 2000 + seed))
        cfg = BoostConfig(rounds=150, gamma_mode=GammaMode.with_trusted(trusted),
                          learner=FitConfig(subsample_fraction=0.8), seed=seed)
        gammas.append(run_rboost(train, cfg).gamma_trace[-1].offdiag)
    om, gm = np.median(omegas, axis=0), np.median(gammas, axis=0)
    ok = bool(np.all(np.abs(om - 0.3) <= 0.1) and np.all(np.abs(gm - 0.3) <= 0.1))
    report(6, "flip rates recovered by rLR and trusted-set rBoost", ok,
           f"median ω = ({om[0]:.3f}, {om[1]:.3f}), median γ = ({gm[0]:.3f}, {gm[1]:.3f})", t0)


def test_c7_noise_ordering(report):
    t0 = time.time()
    base = ExperimentConfig(data="synthetic:1000,2,2", noise_kind="asymmetric", noise_rate=0.3,
                            rounds=150, reps=10, base_seed=7)
    med = {}
    for booster, learner, gamma in (("rboost", "rlr", "fixed"), ("rboost", "rlr", "estimate"),
                                    ("adaboost", "lr", "identity")):
        row = run_experiment(replace(base, booster=booster, learner=learner, gamma=gamma)).rows[0]
        med[f"{booster}+{learner}/{gamma}"] = float(np.median(row.per_rep_errors))
    fixed, est, ada = med.values()
    report(7, "fixed gamma < estimated gamma <= AdaBoost+LR (median test error)", fixed < est <= ada,
           ", ".join(f"{k} {v:.2f}%" for k, v in med.items()), t0)


def test_c8_committee_convergence(report):
    t0 = time.time()
    base = ExperimentConfig(data="banana:500,0.2", noise_kind="symmetric", noise_rate=0.1,
                            booster="adaboost", rounds=150, reps=5, base_seed=0, curves=True)
    med = {}
    for learner in ("lr", "rlr"):
        row = run_experiment(replace(base, learner=learner)).rows[0]
        med[learner] = float(np.median([first_round_within(r.train_curve, 1.0) for r in row.curves]))
    report(8, "rLR committee reaches its final training error sooner", med["rlr"] < med["lr"],
           f"median first round within 1 point: LR {med['lr']:.0f}, rLR {med['rlr']:.0f}", t0)


def test_c9_cli_determinism(report, tmp_path):
    t0 = time.time()
    outs = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        subprocess.run(
            [sys.executable, "-m", "rboost.cli", "run", "--data", "synthetic:300,2,2", "--noise", "asymmetric:0.3",
             "--booster", "rboost", "--learner", "rlr", "--gamma", "estimate", "--rounds", "10", "--reps", "3",
             "--seed", "11", "--train-frac", "0.8", "--format", "csv", "--out", str(out)],
            check=True,
        )
        outs.append(out.read_bytes())
    report(9, "identical CLI runs give byte-identical reports", outs[0] == outs[1] and len(outs[0]) > 0,
           f"{len(outs[0])} bytes", t0)
