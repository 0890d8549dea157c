"""Datasets, flip matrices and label-noise injection.

Labels are always ``+1`` / ``-1``. Wherever a class *index* is needed (rows
and columns of a :class:`FlipMatrix`), index 0 is the label ``-1`` and index 1
is the label ``+1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import ParseError, SchemaError, StratificationError

ROW_SUM_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _check_pm1(labels: np.ndarray, what: str) -> None:
    if not np.all((labels == 1) | (labels == -1)):
        raise ValueError(f"{what} must contain only +1 and -1")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with observed labels and, after noise injection, the clean ones."""

    features: np.ndarray
    labels: np.ndarray
    true_labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.labels).astype(np.int64, copy=False)
        if y.shape != (X.shape[0],):
            raise ValueError(
                f"labels length {y.shape} does not match {X.shape[0]} feature rows"
            )
        _check_pm1(y, "labels")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        if self.true_labels is not None:
            t = np.asarray(self.true_labels).astype(np.int64, copy=False)
            if t.shape != y.shape:
                raise ValueError("true_labels must have the same length as labels")
            _check_pm1(t, "true_labels")
            object.__setattr__(self, "true_labels", _frozen(t))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            None if self.true_labels is None else self.true_labels[idx],
            self.name,
        )

    def with_labels(self, labels) -> Dataset:
        """Same features, new observed labels, clean labels dropped."""
        return Dataset(self.features, labels, None, self.name)


@dataclass(frozen=True, eq=False)
class FlipMatrix:
    """Row-stochastic 2x2 table, ``p[j, k] = P(observed class k | true class j)``."""

    p: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.shape != (2, 2):
            raise ValueError(f"flip matrix must be 2x2, got {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ValueError(f"flip matrix entries must lie in [0, 1]: {p.tolist()}")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError(f"flip matrix rows must sum to 1: {p.tolist()}")
        object.__setattr__(self, "p", _frozen(p))

    @classmethod
    def identity(cls) -> FlipMatrix:
        return cls(np.eye(2))

    @classmethod
    def from_offdiag(cls, p01: float, p10: float) -> FlipMatrix:
        """``p01`` = P(observed +1 | true -1), ``p10`` = P(observed -1 | true +1)."""
        return cls(np.array([[1.0 - p01, p01], [p10, 1.0 - p10]]))

    @classmethod
    def from_rows(cls, row0: tuple[float, float], row1: tuple[float, float]) -> FlipMatrix:
        """Build from (possibly unnormalised) nonnegative rows, renormalising each."""
        p = np.array([row0, row1], dtype=np.float64)
        return cls(p / p.sum(axis=1, keepdims=True))

    @property
    def offdiag(self) -> tuple[float, float]:
        return float(self.p[0, 1]), float(self.p[1, 0])

    def swapped(self) -> FlipMatrix:
        """The same noise process with the two true classes relabelled."""
        return FlipMatrix(self.p[::-1].copy())

    def allclose(self, other: FlipMatrix, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.p, other.p, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"FlipMatrix(p01={self.p[0, 1]:.6g}, p10={self.p[1, 0]:.6g})"


@dataclass(frozen=True)
class NoiseSpec:
    """Random label-flip noise.

    ``symmetric`` flips both classes at ``rate``. ``asymmetric`` flips only the
    labels of ``affected_class`` at ``rate`` and leaves the other class clean.
    """

    kind: Literal["symmetric", "asymmetric"]
    rate: float
    seed: int = 0
    affected_class: int = 1

    def __post_init__(self):
        if self.kind not in ("symmetric", "asymmetric"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.rate <= 0.5:
            raise ValueError(f"noise rate must be in [0, 0.5], got {self.rate}")
        if self.affected_class not in (1, -1):
            raise ValueError("affected_class must be +1 or -1")

    def flip_matrix(self) -> FlipMatrix:
        r = self.rate
        if self.kind == "symmetric":
            return FlipMatrix.from_offdiag(r, r)
        if self.affected_class == 1:
            return FlipMatrix.from_offdiag(0.0, r)
        return FlipMatrix.from_offdiag(r, 0.0)


def load_csv(
    path: str | Path,
    label_column: int,
    positive_token: str,
    *,
    header: bool = False,
    name: str | None = None,
) -> Dataset:
    """Read a comma-separated file with one label column and numeric features.

    Every row must have the same number of fields. The label column must hold
    exactly two distinct tokens; ``positive_token`` is mapped to +1, the other
    to -1. Feature columns keep their file order.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: no data rows")

    arity = len(rows[0])
    col = label_column if label_column >= 0 else arity + label_column
    if not 0 <= col < arity:
        raise ParseError(f"{path}: label column {label_column} out of range for {arity} fields")
    first_line = 2 if header else 1

    feats, tokens = [], []
    for i, row in enumerate(rows):
        lineno = i + first_line
        if len(row) != arity:
            raise ParseError(f"{path}: row {lineno} has {len(row)} fields, expected {arity}")
        try:
            feats.append([float(v) for j, v in enumerate(row) if j != col])
        except ValueError as exc:
            raise ParseError(f"{path}: row {lineno}: {exc}") from None
        tokens.append(row[col].strip())

    distinct = sorted(set(tokens))
    if len(distinct) != 2:
        raise SchemaError(f"{path}: expected exactly two label tokens, found {distinct}")
    if positive_token not in distinct:
        raise SchemaError(f"{path}: positive token {positive_token!r} not in {distinct}")

    labels = np.where(np.array(tokens) == positive_token, 1, -1)
    X = np.array(feats, dtype=np.float64).reshape(len(rows), arity - 1)
    return Dataset(X, labels, name=name if name is not None else path.stem)


def generate_two_gaussians(n: int, dim: int, separation: float, seed: int) -> Dataset:
    """Two isotropic unit-variance Gaussians with means ``±(separation/√dim)·1``.

    The classes are balanced (``ceil(n/2)`` positives) and the Bayes error is
    ``Φ(-separation)``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if dim < 1:
        raise ValueError(f"need dim >= 1, got {dim}")
    if not separation > 0:
        raise ValueError(f"separation must be positive, got {separation}")
    rng = np.random.default_rng(seed)
    n_pos = (n + 1) // 2
    labels = np.r_[np.ones(n_pos, dtype=np.int64), -np.ones(n - n_pos, dtype=np.int64)]
    labels = labels[rng.permutation(n)]
    shift = separation / math.sqrt(dim)
    X = rng.standard_normal((n, dim)) + shift * labels[:, None]
    return Dataset(X, labels, name=f"gauss(n={n},dim={dim},sep={separation:g})")


def generate_banana(n: int, spread: float, seed: int) -> Dataset:
    """Two interleaved half-moons plus isotropic Gaussian jitter of std ``spread``.

    Not linearly separable, so a committee of linear models has to work for
    its accuracy over many rounds.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if spread < 0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    rng = np.random.default_rng(seed)
    n_pos = (n + 1) // 2
    labels = np.r_[np.ones(n_pos, dtype=np.int64), -np.ones(n - n_pos, dtype=np.int64)]
    t = rng.uniform(0.0, math.pi, n)
    upper = np.c_[np.cos(t), np.sin(t)]
    lower = np.c_[1.0 - np.cos(t), 0.5 - np.sin(t)]
    X = np.where(labels[:, None] > 0, upper, lower) + spread * rng.standard_normal((n, 2))
    perm = rng.permutation(n)
    return Dataset(X[perm], labels[perm], name=f"banana(n={n},spread={spread:g})")


def inject_label_noise(data: Dataset, spec: NoiseSpec) -> Dataset:
    """Flip each label independently with its class's rate from ``spec``.

    The returned dataset keeps the original labels in ``true_labels``.
    """
    if data.true_labels is not None:
        raise ValueError("dataset already carries injected noise")
    p = spec.flip_matrix().p
    rate = np.where(data.labels == 1, p[1, 0], p[0, 1])
    u = np.random.default_rng(spec.seed).random(data.n)
    noisy = np.where(u < rate, -data.labels, data.labels)
    return Dataset(data.features, noisy, data.labels, data.name)


def _stratified_take(labels: np.ndarray, counts: dict[int, int], rng) -> np.ndarray:
    picked = []
    for cls in (-1, 1):
        idx = np.flatnonzero(labels == cls)
        picked.append(idx[rng.permutation(idx.size)[: counts[cls]]])
    return np.sort(np.concatenate(picked))


def split(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test partition by observed label.

    Each class contributes ``round(train_fraction · n_class)`` samples to the
    training side, clipped so both sides keep at least one of every class.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    counts = {}
    for cls in (-1, 1):
        n_c = int(np.sum(data.labels == cls))
        if n_c < 2:
            raise StratificationError(f"class {cls:+d} has {n_c} member(s); need at least 2")
        counts[cls] = min(max(math.floor(train_fraction * n_c + 0.5), 1), n_c - 1)
    rng = np.random.default_rng(seed)
    train_idx = _stratified_take(data.labels, counts, rng)
    test_mask = np.ones(data.n, dtype=bool)
    test_mask[train_idx] = False
    return data.subset(train_idx), data.subset(np.flatnonzero(test_mask))


def holdout(data: Dataset, size: int, seed: int) -> tuple[Dataset, Dataset]:
    """Carve ``size`` samples (both classes present) out of ``data``.

    Returns ``(carved, rest)``. Class shares follow the class proportions.
    """
    n_pos = int(np.sum(data.labels == 1))
    n_neg = data.n - n_pos
    if size < 2 or size >= data.n:
        raise ValueError(f"holdout size must be in [2, {data.n - 1}], got {size}")
    if n_pos < 2 or n_neg < 2:
        raise StratificationError("both classes need at least 2 members to carve a holdout")
    k_pos = min(max(math.floor(size * n_pos / data.n + 0.5), 1), size - 1)
    counts = {1: min(k_pos, n_pos - 1), -1: min(size - k_pos, n_neg - 1)}
    rng = np.random.default_rng(seed)
    idx = _stratified_take(data.labels, counts, rng)
    rest = np.ones(data.n, dtype=bool)
    rest[idx] = False
    return data.subset(idx), data.subset(np.flatnonzero(rest))
