"""Kernel ridge regression on precomputed Gram matrices.

``fit`` solves (K + lambda I) alpha = y with a Cholesky factorization,
falling back to a symmetric eigendecomposition when the factorization
fails, and enforces the residual contract ||(K + lambda I) alpha - y||
<= 1e-8 ||y||.  Ridgeless regression (lambda = 0) therefore only
succeeds on numerically invertible Gram matrices; otherwise a
NumericalError advises raising lambda.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import NumericalError, ValidationError
from .kernels import CrossKernel, KernelConfig, KernelMatrix

log = logging.getLogger(__name__)

#: Default regularization grid: ridgeless plus 10^-12 ... 10^2.
DEFAULT_LAMBDA_GRID: tuple[float, ...] = (0.0,) + tuple(10.0**k for k in range(-12, 3))

RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class KRRModel:
    """Fitted dual coefficients plus everything needed to apply them."""

    alpha: np.ndarray
    lam: float
    train_ids: tuple[str, ...]
    config: KernelConfig
    y_mean: float = 0.0
    y_scale: float = 1.0

    def __post_init__(self) -> None:
        alpha = np.ascontiguousarray(self.alpha, dtype=np.float64)
        alpha.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "train_ids", tuple(self.train_ids))


@dataclass(frozen=True)
class Scores:
    r2: float
    mae: float


@dataclass(frozen=True)
class FitReport:
    """Outcome of lambda tuning, later completed with test-set scores.

    ``r2`` and ``mae`` are NaN straight out of ``tune_lambda`` (no test
    set exists during cross-validation) and are filled in by the
    evaluation layer.  ``cv_table`` carries one (lambda, mean validation
    R^2) row per grid value, NaN marking grid values whose ridge system
    was unsolvable on some fold.
    """

    lambda_selected: float
    cv_table: tuple[tuple[float, float], ...]
    seed: int
    r2: float = math.nan
    mae: float = math.nan

    def completed(self, r2: float, mae: float) -> "FitReport":
        return replace(self, r2=r2, mae=mae)


def _prepare_y(y, n: int) -> np.ndarray:
    arr = np.ascontiguousarray(y, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ValidationError(f"target vector must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("target vector contains non-finite values")
    return arr


def fit(gram: KernelMatrix, y, lam: float, standardize: bool = False) -> KRRModel:
    """Solve (K + lambda I) alpha = y and return the fitted model."""
    if not (lam >= 0.0 and np.isfinite(lam)):
        raise ValidationError("lambda must be a finite non-negative real")
    yv = _prepare_y(y, gram.n)
    y_mean, y_scale = 0.0, 1.0
    if standardize:
        y_mean = float(yv.mean())
        std = float(yv.std())
        y_scale = std if std > 0.0 else 1.0
    yw = (yv - y_mean) / y_scale

    m = gram.values.copy()
    idx = np.arange(gram.n)
    m[idx, idx] += lam

    alpha, solve_again = _solve_spd(m, yw)
    # One step of iterative refinement keeps the residual contract
    # attainable on moderately conditioned ridgeless systems.
    residual = yw - m @ alpha
    alpha = alpha + solve_again(residual)
    res_norm = float(np.linalg.norm(m @ alpha - yw))
    y_norm = float(np.linalg.norm(yw))
    if res_norm > RESIDUAL_RTOL * y_norm + 1e-300:
        raise NumericalError(
            f"ridge system solve left residual {res_norm:.3e} > {RESIDUAL_RTOL:g}*||y||; "
            f"the Gram matrix is numerically singular at lambda={lam:g}, use a larger lambda"
        )
    return KRRModel(alpha, float(lam), gram.ids, gram.config, y_mean, y_scale)


def _solve_spd(m: np.ndarray, rhs: np.ndarray):
    """Return (solution, resolver) where resolver solves further right-hand sides."""
    try:
        factor = scipy.linalg.cho_factor(m, check_finite=False)
    except scipy.linalg.LinAlgError:
        w, v = np.linalg.eigh(m)
        cutoff = np.max(np.abs(w)) * 1e-14 if w.size else 0.0
        inv_w = np.where(np.abs(w) > cutoff, 1.0 / np.where(w == 0.0, 1.0, w), 0.0)

        def eig_solve(b: np.ndarray) -> np.ndarray:
            return v @ (inv_w * (v.T @ b))

        return eig_solve(rhs), eig_solve

    def cho_solve(b: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(factor, b, check_finite=False)

    return cho_solve(rhs), cho_solve


def predict(model: KRRModel, kx: CrossKernel) -> np.ndarray:
    """Apply a fitted model through a train-by-test cross-kernel."""
    if kx.train_ids != model.train_ids:
        raise ValidationError("cross-kernel training side does not match the fitted model")
    if kx.config != model.config:
        raise ValidationError("cross-kernel was built with a different kernel configuration")
    raw = kx.values.T @ model.alpha
    return raw * model.y_scale + model.y_mean


def score(y_true, y_pred) -> Scores:
    """Coefficient of determination and mean absolute error."""
    yt = np.ascontiguousarray(y_true, dtype=np.float64)
    yp = np.ascontiguousarray(y_pred, dtype=np.float64)
    if yt.shape != yp.shape or yt.ndim != 1 or yt.shape[0] < 1:
        raise ValidationError("score expects two equal-length 1-d arrays")
    if not (np.all(np.isfinite(yt)) and np.all(np.isfinite(yp))):
        raise ValidationError("score inputs contain non-finite values")
    ss_tot = float(np.sum((yt - yt.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValidationError("R^2 is undefined for a constant y_true")
    ss_res = float(np.sum((yt - yp) ** 2))
    return Scores(r2=1.0 - ss_res / ss_tot, mae=float(np.mean(np.abs(yt - yp))))


def _fold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    bounds = [(f * n) // folds for f in range(folds + 1)]
    return [np.sort(perm[bounds[f] : bounds[f + 1]]) for f in range(folds)]


def tune_lambda(
    gram: KernelMatrix,
    y,
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 5,
    seed: int = 0,
    standardize: bool = False,
) -> FitReport:
    """Pick lambda by k-fold cross-validated R^2 on the training Gram matrix.

    Folds are contiguous blocks of a seeded permutation.  Grid values
    whose ridge system is unsolvable on some fold are excluded from the
    selection (their cv_table entry is NaN); ties in mean validation R^2
    break toward the larger lambda.
    """
    yv = _prepare_y(y, gram.n)
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValidationError("lambda grid must be non-empty")
    if any(not (g >= 0.0 and np.isfinite(g)) for g in grid):
        raise ValidationError("lambda grid values must be finite and non-negative")
    if folds < 2:
        raise ValidationError("cross-validation needs at least 2 folds")
    fold_idx = _fold_indices(gram.n, int(folds), seed)
    if min(len(f) for f in fold_idx) < 2:
        raise ValidationError(f"fold too small: {gram.n} points across {folds} folds")

    all_idx = np.arange(gram.n)
    folds_data = []
    for val_idx in fold_idx:
        tr_idx = np.setdiff1d(all_idx, val_idx, assume_unique=True)
        sub = KernelMatrix(
            gram.values[np.ix_(tr_idx, tr_idx)], gram.config, tuple(gram.ids[i] for i in tr_idx)
        )
        kx = CrossKernel(
            gram.values[np.ix_(tr_idx, val_idx)],
            gram.config,
            sub.ids,
            tuple(gram.ids[i] for i in val_idx),
        )
        folds_data.append((sub, kx, yv[tr_idx], yv[val_idx]))

    cv_table: list[tuple[float, float]] = []
    for lam in grid:
        fold_scores: list[float] = []
        for sub, kx, y_tr, y_val in folds_data:
            try:
                model = fit(sub, y_tr, lam, standardize=standardize)
            except NumericalError:
                log.warning("lambda=%g unsolvable on a CV fold; excluded from tuning", lam)
                fold_scores = []
                break
            fold_scores.append(score(y_val, predict(model, kx)).r2)
        cv_table.append((lam, float(np.mean(fold_scores)) if fold_scores else math.nan))

    candidates = [(mean, lam) for lam, mean in cv_table if not math.isnan(mean)]
    if not candidates:
        raise NumericalError("no lambda on the grid produced a solvable system on every fold")
    best_mean, best_lam = max(candidates)
    return FitReport(lambda_selected=best_lam, cv_table=tuple(cv_table), seed=seed)
