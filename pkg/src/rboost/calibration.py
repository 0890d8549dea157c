"""Score calibration and flip-probability estimation for boosted ensembles.

Ensemble scores ``H`` are mapped to ``P = p(y=+1 | x)`` with Platt's sigmoid
``1 / (1 + exp(A·H + B))``. Given ``P`` and the observed labels, the flip
matrix γ is re-estimated by multiplicative updates that decrease the binomial
log-loss of the observed labels under the flip model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import Dataset, FlipMatrix
from .errors import DegenerateUpdateError

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class PlattModel:
    A: float
    B: float

    def __post_init__(self):
        if not (np.isfinite(self.A) and np.isfinite(self.B)):
            raise ValueError(f"Platt parameters must be finite: A={self.A}, B={self.B}")

    def __call__(self, H):
        return calibrate(self, H)


# Logistic calibration 1/(1+exp(-H)) is the Platt model with A=-1, B=0.
LOGISTIC = PlattModel(-1.0, 0.0)


def calibrate(model: PlattModel, H):
    """Posterior ``1 / (1 + exp(A·H + B))`` clamped to [1e-12, 1 - 1e-12]."""
    z = model.A * np.asarray(H, dtype=np.float64) + model.B
    p = np.clip(np.exp(-np.logaddexp(0.0, z)), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(p) if p.ndim == 0 else p


def _platt_loss(A, B, H, target):
    z = A * H + B
    # -[t log p + (1-t) log(1-p)] with p = σ(-z)
    return float(np.sum(np.logaddexp(0.0, z) - (1.0 - target) * z))


def fit_platt(scores, labels, *, tol: float = 1e-8, max_iter: int = 100) -> PlattModel:
    """Fit Platt's sigmoid by Newton's method with backtracking.

    Targets are smoothed to ``(N₊+1)/(N₊+2)`` for positives and ``1/(N₋+2)``
    for negatives, so separable scores still give a finite fit.
    """
    H = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if H.shape != y.shape or H.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == -1))
    if n_pos + n_neg != y.size:
        raise ValueError("labels must be +1/-1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("Platt calibration needs both classes")
    if y.size < 4:
        raise ValueError("Platt calibration needs at least 4 samples")

    target = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    loss = _platt_loss(A, B, H, target)
    for _ in range(max_iter):
        z = A * H + B
        p = np.exp(-np.logaddexp(0.0, z))
        r = target - p
        g = np.array([np.dot(r, H), r.sum()])
        if np.linalg.norm(g) <= tol:
            break
        d = p * (1.0 - p)
        hess = np.array([[np.dot(d, H * H), np.dot(d, H)], [np.dot(d, H), d.sum()]])
        hess[np.diag_indices(2)] += 1e-12
        step = -np.linalg.solve(hess, g)
        slope = float(np.dot(g, step))
        size = 1.0
        while size >= 1e-12:
            new = _platt_loss(A + size * step[0], B + size * step[1], H, target)
            if new <= loss + 1e-4 * size * slope:
                break
            size *= 0.5
        else:
            break
        A, B, loss = A + size * step[0], B + size * step[1], new
    return PlattModel(float(A), float(B))


def _clamp(P) -> np.ndarray:
    return np.clip(np.asarray(P, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)


def gamma_objective(gamma: FlipMatrix, P, labels) -> float:
    """Binomial log-loss of the observed labels when ``P = p(y=+1 | x)``."""
    P = _clamp(P)
    pos = np.asarray(labels) == 1
    if P.shape != pos.shape:
        raise ValueError("P and labels must have equal length")
    g = gamma.p
    p_obs_pos = g[1, 1] * P + g[0, 1] * (1.0 - P)
    p_obs_neg = g[0, 0] * (1.0 - P) + g[1, 0] * P
    return float(-np.sum(np.log(np.where(pos, p_obs_pos, p_obs_neg))))


def update_gamma(gamma: FlipMatrix, P, labels) -> FlipMatrix:
    """One multiplicative sweep over γ; never increases :func:`gamma_objective`."""
    P = _clamp(P)
    pos = np.asarray(labels) == 1
    g = gamma.p
    den_pos = g[1, 1] * P + g[0, 1] * (1.0 - P)
    den_neg = g[1, 0] * P + g[0, 0] * (1.0 - P)
    g11 = g[1, 1] * np.sum(P[pos] / den_pos[pos])
    g01 = g[0, 1] * np.sum((1.0 - P[pos]) / den_pos[pos])
    g10 = g[1, 0] * np.sum(P[~pos] / den_neg[~pos])
    g00 = g[0, 0] * np.sum((1.0 - P[~pos]) / den_neg[~pos])
    row0, row1 = g00 + g01, g10 + g11
    if not row0 > 0 or not row1 > 0:
        raise DegenerateUpdateError(f"gamma row mass vanished (row0={row0}, row1={row1})")
    return FlipMatrix(np.array([[g00 / row0, g01 / row0], [g10 / row1, g11 / row1]]))


@dataclass(frozen=True)
class GammaEstimate:
    gamma: FlipMatrix
    loss_trace: tuple

    @property
    def sweeps(self) -> int:
        return len(self.loss_trace) - 1


def estimate_gamma(
    gamma: FlipMatrix, P, labels, *, tol: float = 1e-6, max_sweeps: int = 100
) -> GammaEstimate:
    """Iterate :func:`update_gamma` until no entry moves by ``tol`` or more."""
    trace = [gamma_objective(gamma, P, labels)]
    for _ in range(max_sweeps):
        new = update_gamma(gamma, P, labels)
        moved = np.max(np.abs(new.p - gamma.p))
        gamma = new
        trace.append(gamma_objective(gamma, P, labels))
        if moved < tol:
            break
    return GammaEstimate(gamma, tuple(trace))


def trusted_calibration(trusted: Dataset, scorer: Callable[[np.ndarray], np.ndarray]) -> PlattModel:
    """Platt fit on ``(scorer(x), y)`` over a small set of clean-labelled samples."""
    return fit_platt(scorer(trusted.features), trusted.labels)
