"""AdaBoost and rBoost ensembles over (robust) logistic regression learners.

rBoost replaces the exponential loss with

    Σ 1(ỹ=+1)·{γ00·e^{-H} + γ01·e^{H}} + 1(ỹ=-1)·{γ11·e^{H} + γ10·e^{-H}}

For each sample a "keep" weight ``d_keep ∝ e^{-ỹH}`` and a "flip" weight
``d_flip ∝ e^{+ỹH}`` are tracked; multiplied by the matching γ entries they
give the loss terms above. The per-sample effective weight
``γ_keep·d_keep - γ_flip·d_flip`` can be negative, in which case the base
learner sees that sample with its label reversed and weight ``|w|``.

With γ equal to the identity every round coincides with classic AdaBoost.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .calibration import PlattModel, calibrate, estimate_gamma, fit_platt
from .dataset import Dataset, FlipMatrix
from .errors import DegenerateFitError
from .robust_lr import FitConfig, RobustLinearModel, fit_robust_lr

log = logging.getLogger(__name__)


# -- sample weights -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleWeightTable:
    """Unnormalised keep/flip weights, stored as logarithms.

    ``d_keep`` pairs with γ00 for ỹ=+1 and γ11 for ỹ=-1; ``d_flip`` pairs with
    γ01 for ỹ=+1 and γ10 for ỹ=-1.
    """

    log_keep: np.ndarray
    log_flip: np.ndarray

    @classmethod
    def from_scores(cls, H, labels) -> SampleWeightTable:
        """The table of an ensemble with scores ``H``: ``d_keep = e^{-ỹH}``, ``d_flip = e^{ỹH}``."""
        yH = np.asarray(labels) * np.asarray(H, dtype=np.float64)
        return cls(-yH, yH)

    @property
    def d_keep(self) -> np.ndarray:
        return np.exp(self.log_keep)

    @property
    def d_flip(self) -> np.ndarray:
        return np.exp(self.log_flip)

    def rescaled(self) -> SampleWeightTable:
        """Divide every entry by the common largest entry (max becomes 1)."""
        top = max(self.log_keep.max(), self.log_flip.max())
        return SampleWeightTable(self.log_keep - top, self.log_flip - top)


def init_sample_weights(labels) -> SampleWeightTable:
    """All keep/flip weights equal to one, i.e. the table of ``H = 0``.

    γ is not folded in here; it multiplies the table at use time.
    """
    n = len(labels)
    return SampleWeightTable(np.zeros(n), np.zeros(n))


def _gamma_factors(gamma: FlipMatrix, labels) -> tuple[np.ndarray, np.ndarray]:
    g = gamma.p
    pos = np.asarray(labels) == 1
    return np.where(pos, g[0, 0], g[1, 1]), np.where(pos, g[0, 1], g[1, 0])


def keep_flip_mass(table: SampleWeightTable, gamma: FlipMatrix, labels) -> tuple[float, float]:
    """``(A, B)``: total γ-weighted keep mass and flip mass."""
    keep, flip = _gamma_factors(gamma, labels)
    return float(np.dot(keep, table.d_keep)), float(np.dot(flip, table.d_flip))


def effective_weights(table: SampleWeightTable, gamma: FlipMatrix, labels) -> np.ndarray:
    """Signed weights ``γ_keep(ỹ)·d_keep - γ_flip(ỹ)·d_flip``."""
    keep, flip = _gamma_factors(gamma, labels)
    return keep * table.d_keep - flip * table.d_flip


def weighted_error(predictions, labels, w) -> float:
    """Σ wᵢ·1(hᵢ ≠ ỹᵢ) with the (possibly signed, unnormalised) weights as given."""
    predictions, labels, w = np.asarray(predictions), np.asarray(labels), np.asarray(w)
    if not predictions.shape == labels.shape == w.shape:
        raise ValueError("predictions, labels and weights must have equal length")
    return float(np.sum(w[predictions != labels]))


def update_sample_weights(table: SampleWeightTable, predictions, labels, alpha: float) -> SampleWeightTable:
    """Fold a new member ``alpha·h`` into the table.

    ``d_keep`` grows by ``e^{2α}`` where h is wrong, ``d_flip`` where h is
    right; the shared ``e^{-α}`` factor is dropped.
    """
    if not math.isfinite(alpha):
        raise FloatingPointError(f"non-finite alpha {alpha}")
    wrong = np.asarray(predictions) != np.asarray(labels)
    return SampleWeightTable(table.log_keep + 2.0 * alpha * wrong, table.log_flip + 2.0 * alpha * ~wrong)


# -- losses and the step size ---------------------------------------------------


def rboost_loss(H, gamma: FlipMatrix, labels) -> float:
    H = np.asarray(H, dtype=np.float64)
    keep, flip = _gamma_factors(gamma, labels)
    yH = np.asarray(labels) * H
    return float(np.sum(keep * np.exp(-yH) + flip * np.exp(yH)))


def stepwise_loss(table: SampleWeightTable, gamma: FlipMatrix, labels, predictions, alpha: float) -> float:
    """Loss of the ensemble after adding ``alpha·h``, from the table alone.

    2·sinh(α)·Σ wᵢ·1(h≠ỹ) + e^{-α}·A + e^{α}·B
    """
    w = effective_weights(table, gamma, labels)
    eps = weighted_error(predictions, labels, w)
    A, B = keep_flip_mass(table, gamma, labels)
    return 2.0 * math.sinh(alpha) * eps + math.exp(-alpha) * A + math.exp(alpha) * B


def alpha_gradient(alpha: float, epsilon: float, A: float, B: float) -> float:
    """Derivative of the round objective in α: 2cosh(α)ε - e^{-α}A + e^{α}B."""
    return 2.0 * math.cosh(alpha) * epsilon - math.exp(-alpha) * A + math.exp(alpha) * B


def round_objective(alpha: float, epsilon: float, A: float, B: float) -> float:
    return 2.0 * math.sinh(alpha) * epsilon + math.exp(-alpha) * A + math.exp(alpha) * B


def solve_alpha(epsilon: float, A: float, B: float, alpha_max: float = 10.0, tol: float = 1e-8) -> float:
    """Step size minimising the round objective over ``[-alpha_max, alpha_max]``.

    A sign change of the gradient inside the bracket is located by Brent's
    method to ``|f(α)| <= tol`` (measured after scaling so ``A + B = 1``). If
    the gradient has no sign change, or is not monotone, a bounded scalar
    minimisation and the bracket endpoints are compared instead.
    """
    if A < 0 or B < 0:
        raise ValueError("keep/flip masses must be nonnegative")
    total = A + B
    if not total > 0:
        raise ValueError("degenerate round: A + B = 0")
    eps, a, b = epsilon / total, A / total, B / total
    lo, hi = -alpha_max, alpha_max

    def f(al):
        return alpha_gradient(al, eps, a, b)

    def g(al):
        return round_objective(al, eps, a, b)

    candidates = [lo, hi]
    f_lo, f_hi = f(lo), f(hi)
    if f_lo < 0.0 < f_hi:
        root = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        if abs(f(root)) > tol:
            # bisection fallback polish; brentq should already be tight
            root = _bisect(f, lo, hi, tol)
        candidates.append(root)
    # f' = (ε+B)e^α + (A-ε)e^{-α} is positive unless ε lies outside [-B, A];
    # only then can g have stationary points that the sign test above misses
    if not (-b <= eps <= a):
        res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        candidates.append(float(res.x))
    return min(candidates, key=lambda al: (g(al), abs(al)))


def _bisect(f, lo, hi, tol):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol or hi - lo < 1e-16:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- ensembles ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted vote ``H(x) = Σ α_t h_t(x)``."""

    alphas: tuple
    models: tuple
    gamma_trace: tuple = ()
    calibration: PlattModel | None = None

    def __post_init__(self):
        if len(self.alphas) != len(self.models):
            raise ValueError("alphas and models must have equal length")
        if not all(math.isfinite(a) for a in self.alphas):
            raise ValueError("alphas must be finite")

    def __len__(self) -> int:
        return len(self.alphas)

    def member_predictions(self, X) -> np.ndarray:
        """``(T, n)`` matrix of base predictions."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.array([m.predict(X) for m in self.models]).reshape(len(self), X.shape[0])

    def decision_function(self, X) -> np.ndarray:
        if not len(self):
            raise ValueError("empty ensemble")
        return np.asarray(self.alphas) @ self.member_predictions(X)

    def staged_decision_function(self, X) -> np.ndarray:
        """``(T, n)`` scores of the partial ensembles after each round."""
        preds = self.member_predictions(X)
        return np.cumsum(np.asarray(self.alphas)[:, None] * preds, axis=0)

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0.0, 1, -1)


def predict_ensemble(e: Ensemble, x) -> tuple:
    """``(H(x), sign(H(x)))`` with ties going to +1."""
    if not len(e):
        raise ValueError("empty ensemble")
    x = np.asarray(x, dtype=np.float64)
    H = e.decision_function(x)
    label = np.where(H >= 0.0, 1, -1)
    if x.ndim == 1:
        return float(H[0]), int(label[0])
    return H, label


@dataclass(frozen=True, eq=False)
class GammaMode:
    """How γ is set: ``identity`` (AdaBoost), ``fixed``, ``estimate`` or ``trusted``."""

    kind: str = "identity"
    gamma: FlipMatrix | None = None
    trusted: Dataset | None = None
    init_offdiag: float = 0.2

    def __post_init__(self):
        if self.kind not in ("identity", "fixed", "estimate", "trusted"):
            raise ValueError(f"unknown gamma mode {self.kind!r}")
        if self.kind == "fixed" and self.gamma is None:
            raise ValueError("fixed gamma mode needs a FlipMatrix")
        if self.kind == "trusted" and self.trusted is None:
            raise ValueError("trusted gamma mode needs a trusted Dataset")

    @classmethod
    def identity(cls) -> GammaMode:
        return cls("identity")

    @classmethod
    def fixed(cls, gamma: FlipMatrix) -> GammaMode:
        return cls("fixed", gamma=gamma)

    @classmethod
    def estimate(cls, init_offdiag: float = 0.2) -> GammaMode:
        return cls("estimate", init_offdiag=init_offdiag)

    @classmethod
    def with_trusted(cls, trusted: Dataset, init_offdiag: float = 0.2) -> GammaMode:
        return cls("trusted", trusted=trusted, init_offdiag=init_offdiag)

    def initial(self) -> FlipMatrix:
        if self.kind == "identity":
            return FlipMatrix.identity()
        if self.kind == "fixed":
            return self.gamma
        return FlipMatrix.from_offdiag(self.init_offdiag, self.init_offdiag)


@dataclass(frozen=True)
class BoostConfig:
    rounds: int = 150
    gamma_mode: GammaMode = field(default_factory=GammaMode.identity)
    alpha_max: float = 10.0
    alpha_tol: float = 1e-8
    learner: FitConfig = field(default_factory=FitConfig)
    seed: int = 0
    gamma_tol: float = 1e-6
    gamma_max_sweeps: int = 100

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not self.alpha_tol > 0 or not self.alpha_max > 0:
            raise ValueError("alpha_tol and alpha_max must be positive")

    def round_seeds(self) -> list[int]:
        ss = np.random.SeedSequence(self.seed)
        return [int(s) for s in ss.generate_state(self.rounds, dtype=np.uint32)]


def _fit_member(X, targets, weights, learner: FitConfig, seed: int) -> RobustLinearModel | None:
    try:
        return fit_robust_lr(Dataset(X, targets), weights, replace(learner, seed=seed))
    except DegenerateFitError as exc:
        log.warning("base learner fit failed, round skipped: %s", exc)
        return None


def run_rboost(
    train: Dataset,
    cfg: BoostConfig,
    calibrator: Callable[[np.ndarray, np.ndarray], PlattModel] = fit_platt,
) -> Ensemble:
    """Build an rBoost ensemble.

    Each round fits a base learner to the signed effective weights, solves for
    the step size, updates the keep/flip table and, in ``estimate`` and
    ``trusted`` modes, re-calibrates the scores and re-estimates γ. In
    ``estimate`` mode ``calibrator`` is fit on the noisy training labels, in
    ``trusted`` mode on the clean trusted set only.
    """
    X, y = train.features, train.labels
    if not (np.any(y == 1) and np.any(y == -1)):
        raise ValueError("training data must contain both labels")
    mode = cfg.gamma_mode
    gamma = mode.initial()
    table = init_sample_weights(y)
    H = np.zeros(train.n)
    trusted = mode.trusted if mode.kind == "trusted" else None
    H_trusted = np.zeros(trusted.n) if trusted is not None else None
    platt = None

    alphas, models, trace = [], [], []
    skipped = 0
    for t, seed in enumerate(cfg.round_seeds()):
        w = effective_weights(table, gamma, y)
        targets = np.where(w < 0, -y, y)
        model = _fit_member(X, targets, np.abs(w), cfg.learner, seed)
        if model is None:
            skipped += 1
            alphas.append(0.0)
            models.append(RobustLinearModel.zero(train.m))
            trace.append(gamma)
            continue

        pred = model.predict(X)
        eps = weighted_error(pred, y, w)
        A, B = keep_flip_mass(table, gamma, y)
        alpha = solve_alpha(eps, A, B, cfg.alpha_max, cfg.alpha_tol)
        table = update_sample_weights(table, pred, y, alpha).rescaled()
        H += alpha * pred
        alphas.append(alpha)
        models.append(model)

        if mode.kind in ("estimate", "trusted"):
            if trusted is not None:
                H_trusted += alpha * model.predict(trusted.features)
                platt = calibrator(H_trusted, trusted.labels)
            else:
                platt = calibrator(H, y)
            P = calibrate(platt, H)
            gamma = estimate_gamma(
                gamma, P, y, tol=cfg.gamma_tol, max_sweeps=cfg.gamma_max_sweeps
            ).gamma
        trace.append(gamma)
        log.debug("round %d: eps=%.6g A=%.6g B=%.6g alpha=%.6g gamma=%r", t, eps, A, B, alpha, gamma)

    if skipped == cfg.rounds:
        raise DegenerateFitError("every boosting round failed to fit a base learner")
    return Ensemble(tuple(alphas), tuple(models), tuple(trace), platt)


def run_adaboost(train: Dataset, cfg: BoostConfig) -> Ensemble:
    """Classic AdaBoost on normalised weights with ``α = ½·ln((1-ε)/ε)``.

    ``cfg.gamma_mode`` is ignored. α is clipped to ``±cfg.alpha_max`` (a
    perfect learner gets ``+alpha_max``).
    """
    X, y = train.features, train.labels
    D = np.full(train.n, 1.0 / train.n)
    alphas, models = [], []
    skipped = 0
    for seed in cfg.round_seeds():
        model = _fit_member(X, y, D, cfg.learner, seed)
        if model is None:
            skipped += 1
            alphas.append(0.0)
            models.append(RobustLinearModel.zero(train.m))
            continue
        pred = model.predict(X)
        err = float(np.sum(D[pred != y]))
        if err <= 0.0:
            alpha = cfg.alpha_max
        elif err >= 1.0:
            alpha = -cfg.alpha_max
        else:
            alpha = float(np.clip(0.5 * math.log((1.0 - err) / err), -cfg.alpha_max, cfg.alpha_max))
        D = D * np.exp(-alpha * y * pred)
        D /= D.sum()
        alphas.append(alpha)
        models.append(model)
    if skipped == cfg.rounds:
        raise DegenerateFitError("every boosting round failed to fit a base learner")
    identity = FlipMatrix.identity()
    return Ensemble(tuple(alphas), tuple(models), (identity,) * len(alphas))
