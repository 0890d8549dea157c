"""Weighted logistic regression with a latent label-flip model (rLR).

The observed label is modelled as a noisy copy of a latent true label:

    P(ỹ=1 | x) = ω11·σ(βᵀx) + ω01·(1 - σ(βᵀx))

where ``ω[j, k] = P(ỹ=k | y=j)``. β is fit by second-order ascent on the
weighted log-likelihood with ω fixed, ω by multiplicative fixed-point steps
with β fixed, and the two alternate until ω settles. With ω frozen at the
identity the model is ordinary weighted logistic regression.

A bias is handled by appending a constant-one feature, so ``beta`` has
``m + 1`` entries with the bias last.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .dataset import Dataset, FlipMatrix
from .errors import DegenerateFitError, DegenerateUpdateError

PROB_CLAMP = 1e-12
_SIGMOID_LO = np.finfo(np.float64).tiny
_SIGMOID_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class FitConfig:
    max_outer_iters: int = 25
    grad_tol: float = 1e-6
    omega_tol: float = 1e-6
    max_omega_iters: int = 50
    subsample_fraction: float = 1.0
    seed: int = 0
    omega_init_offdiag: float = 0.2
    freeze_omega: bool = False
    max_beta_iters: int = 200
    # stop alternating once a full (beta, omega) pass gains less than this
    loglik_tol: float = 1e-10

    def __post_init__(self):
        if min(self.max_outer_iters, self.max_omega_iters, self.max_beta_iters) < 1:
            raise ValueError("iteration counts must be >= 1")
        if min(self.grad_tol, self.omega_tol, self.loglik_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must be in (0, 1]")
        if not 0.0 <= self.omega_init_offdiag < 0.5:
            raise ValueError("omega_init_offdiag must be in [0, 0.5)")


def plain_lr_config(**overrides) -> FitConfig:
    """FitConfig for ordinary logistic regression (ω frozen at the identity)."""
    return replace(FitConfig(freeze_omega=True, omega_init_offdiag=0.0), **overrides)


@dataclass(frozen=True, eq=False)
class RobustLinearModel:
    beta: np.ndarray
    omega: FlipMatrix = field(default_factory=FlipMatrix.identity)
    # Objective after each half-step of the alternating fit (normalised weights).
    history: tuple = ()

    def __post_init__(self):
        beta = np.array(self.beta, dtype=np.float64)
        if beta.ndim != 1 or not np.all(np.isfinite(beta)):
            raise ValueError("beta must be a finite vector")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def zero(cls, m: int) -> RobustLinearModel:
        return cls(np.zeros(m + 1))

    @property
    def m(self) -> int:
        return self.beta.size - 1

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.m:
            raise ValueError(f"expected {self.m} features, got {X.shape[-1]}")
        return X @ self.beta[:-1] + self.beta[-1]

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0.0, 1, -1)


def sigmoid(a):
    """Logistic function, kept strictly inside (0, 1) for any finite input."""
    out = np.clip(expit(a), _SIGMOID_LO, _SIGMOID_HI)
    return float(out) if np.ndim(out) == 0 else out


def noisy_posterior(model: RobustLinearModel, x) -> tuple:
    """Return ``(P(ỹ=+1 | x), P(ỹ=-1 | x))`` under the flip model."""
    s = expit(model.decision_function(x))
    p = model.omega.p
    p1 = p[1, 1] * s + p[0, 1] * (1.0 - s)
    p0 = p[1, 0] * s + p[0, 0] * (1.0 - s)
    if np.ndim(p1) == 0:
        return float(p1), float(p0)
    return p1, p0


def predict(model: RobustLinearModel, x):
    """+1 where the latent-class posterior σ(βᵀx) is at least 1/2, else -1."""
    out = model.predict(x)
    return int(out) if np.ndim(out) == 0 else out


# -- array-level likelihood machinery -----------------------------------------


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _check_weights(w, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"expected {n} sample weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("sample weights must be finite and nonnegative")
    return w


def _log_terms(beta, p, Xa):
    """log σ(a), log σ(-a), log P̃¹, log P̃⁰ for a = Xa·β, all computed in log space."""
    a = Xa @ beta
    ls = -np.logaddexp(0.0, -a)
    lsn = ls - a
    with np.errstate(divide="ignore"):
        lp = np.log(p)
    log_p1 = np.logaddexp(lp[1, 1] + ls, lp[0, 1] + lsn)
    log_p0 = np.logaddexp(lp[1, 0] + ls, lp[0, 0] + lsn)
    return ls, lsn, log_p1, log_p0


def _objective(beta, p, Xa, t, w, *, derivs=0):
    """Weighted log-likelihood; with ``derivs`` >= 1 also gradient, >= 2 Hessian."""
    ls, lsn, log_p1, log_p0 = _log_terms(beta, p, Xa)
    log_obs = np.where(t, log_p1, log_p0)
    pos = w > 0
    value = float(np.dot(w[pos], log_obs[pos]))
    if derivs == 0:
        return value
    c = p[1, 1] - p[0, 1]
    # dℓ/da = ±c·σ(1-σ)/P̃, written via logs so extreme margins stay finite
    q = np.exp(ls + lsn - log_obs)
    dl = np.where(t, c * q, -c * q)
    grad = Xa.T @ (w * dl)
    if derivs == 1:
        return value, grad
    d2l = dl * (1.0 - 2.0 * np.exp(ls)) - dl * dl
    hess = (Xa * (w * d2l)[:, None]).T @ Xa
    return value, grad, hess


def _posterior_shares(a, p):
    """P(y=1 | ỹ=1, x) and P(y=1 | ỹ=0, x) as shifted sigmoids of the margin."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.log(p)
        shift1 = lp[1, 1] - lp[0, 1]
        shift0 = lp[1, 0] - lp[0, 0]
    if np.isnan(shift1) or np.isnan(shift0):
        raise DegenerateUpdateError(f"flip matrix has an all-zero column: {p.tolist()}")
    return expit(a + shift1), expit(a + shift0)


def _omega_sweep(a, p, w1, w0) -> np.ndarray:
    """One multiplicative step on a raw 2x2 array; ``w1``/``w0`` split weights by ỹ."""
    r1, r0 = _posterior_shares(a, p)
    g11, g10 = np.dot(w1, r1), np.dot(w0, r0)
    g01, g00 = np.dot(w1, 1.0 - r1), np.dot(w0, 1.0 - r0)
    row0, row1 = g00 + g01, g10 + g11
    if not row0 > 0 or not row1 > 0:
        raise DegenerateUpdateError(
            f"flip-matrix row mass vanished (row0={row0}, row1={row1})"
        )
    return np.array([[g00 / row0, g01 / row0], [g10 / row1, g11 / row1]])


def _omega_step(beta, p, Xa, t, w) -> FlipMatrix:
    w1 = np.where(t, w, 0.0)
    return FlipMatrix(_omega_sweep(Xa @ beta, p, w1, w - w1))


def _dataset_arrays(model, data, sample_weights):
    if data.m != model.m:
        raise ValueError(f"model expects {model.m} features, data has {data.m}")
    w = _check_weights(sample_weights, data.n)
    return _augment(data.features), data.labels == 1, w


# -- public objective / update API --------------------------------------------


def weighted_log_likelihood(model: RobustLinearModel, data: Dataset, sample_weights) -> float:
    """Σ wᵢ log P̃(ỹᵢ | xᵢ), with each P̃ clamped to [1e-12, 1 - 1e-12]."""
    Xa, t, w = _dataset_arrays(model, data, sample_weights)
    ls, lsn, log_p1, log_p0 = _log_terms(model.beta, model.omega.p, Xa)
    lo, hi = np.log(PROB_CLAMP), np.log1p(-PROB_CLAMP)
    log_obs = np.clip(np.where(t, log_p1, log_p0), lo, hi)
    return float(np.dot(w, log_obs))


def log_likelihood_gradient(model: RobustLinearModel, data: Dataset, sample_weights) -> np.ndarray:
    """Gradient of the weighted log-likelihood with respect to ``beta``.

    Σ wᵢ [t·(ω11-ω01)/P̃¹ + (1-t)·(ω10-ω00)/P̃⁰] σ(1-σ) xᵢ with t = 1(ỹ=+1).
    """
    Xa, t, w = _dataset_arrays(model, data, sample_weights)
    return _objective(model.beta, model.omega.p, Xa, t, w, derivs=1)[1]


def update_omega(model: RobustLinearModel, data: Dataset, sample_weights) -> FlipMatrix:
    """One multiplicative fixed-point step for ω with β held fixed.

    Each ``g[j, k]`` is ω[j, k] times the weighted sum, over samples observed
    as class k, of the posterior share of latent class j; rows are then
    renormalised. Zero entries stay zero.
    """
    Xa, t, w = _dataset_arrays(model, data, sample_weights)
    return _omega_step(model.beta, model.omega.p, Xa, t, w)


# -- fitting ------------------------------------------------------------------


def _maximize_beta(beta0, p, Xa, t, w, cfg: FitConfig) -> np.ndarray:
    def fun(b):
        v, g = _objective(b, p, Xa, t, w, derivs=1)
        return -v, -g

    def hess(b):
        return -_objective(b, p, Xa, t, w, derivs=2)[2]

    g0 = _objective(beta0, p, Xa, t, w, derivs=1)[1]
    if np.linalg.norm(g0) <= cfg.grad_tol:
        return beta0
    res = minimize(
        fun, beta0, jac=True, hess=hess, method="trust-exact",
        options={"gtol": cfg.grad_tol, "maxiter": cfg.max_beta_iters},
    )
    return res.x


def fit_robust_lr(data: Dataset, sample_weights=None, cfg: FitConfig | None = None) -> RobustLinearModel:
    """Fit β and ω by alternating maximisation of the weighted likelihood.

    Weights are rescaled to sum to one first, so ``cfg.grad_tol`` refers to
    the gradient of the weight-normalised objective. With
    ``subsample_fraction < 1`` only a random subset of
    ``round(fraction·n)`` samples (drawn from ``cfg.seed``) is used.

    Raises
    ------
    DegenerateFitError
        If the positively weighted samples do not cover both labels.
    """
    cfg = cfg or FitConfig()
    w = np.ones(data.n) if sample_weights is None else _check_weights(sample_weights, data.n)
    X, t = data.features, data.labels == 1

    if cfg.subsample_fraction < 1.0:
        rng = np.random.default_rng(cfg.seed)
        k = max(2, int(np.floor(cfg.subsample_fraction * data.n + 0.5)))
        idx = np.sort(rng.choice(data.n, size=min(k, data.n), replace=False))
        X, t, w = X[idx], t[idx], w[idx]

    if not (np.any(w[t] > 0) and np.any(w[~t] > 0)):
        raise DegenerateFitError("both labels must carry positive weight")
    w = w / w.sum()
    Xa = _augment(X)
    w1 = np.where(t, w, 0.0)
    w0 = w - w1

    omega = FlipMatrix.from_offdiag(cfg.omega_init_offdiag, cfg.omega_init_offdiag)
    beta = np.zeros(Xa.shape[1])
    history = [_objective(beta, omega.p, Xa, t, w)]

    for _ in range(cfg.max_outer_iters):
        beta = _maximize_beta(beta, omega.p, Xa, t, w, cfg)
        history.append(_objective(beta, omega.p, Xa, t, w))
        if cfg.freeze_omega:
            break
        a = Xa @ beta
        p = omega.p
        for _ in range(cfg.max_omega_iters):
            step = _omega_sweep(a, p, w1, w0)
            moved = np.max(np.abs(step - p))
            p = step
            if moved < cfg.omega_tol:
                break
        shift = np.max(np.abs(p - omega.p))
        omega = FlipMatrix(p)
        history.append(_objective(beta, omega.p, Xa, t, w))
        if shift < cfg.omega_tol or history[-1] - history[-3] < cfg.loglik_tol:
            break

    p = omega.p
    if p[1, 1] < p[0, 1] and p[0, 0] < p[1, 0]:
        # the flip model is invariant to relabelling both latent classes;
        # pick the orientation in which most labels are kept
        beta, omega = -beta, omega.swapped()

    return RobustLinearModel(beta, omega, tuple(history))
