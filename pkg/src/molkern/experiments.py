"""Experiment drivers built on the kernel, regression and spectral layers.

Everything here is deterministic given its seeds: cross-validation folds,
split resampling and the work queue all derive from explicit integers,
and parallel reductions preserve input order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dataset_io import TargetTable, make_split
from .errors import NumericalError, ValidationError
from .kernels import CrossKernel, KernelConfig, KernelMatrix, cross as build_cross, gram as build_gram
from .parallel import parallel_map
from .regression import DEFAULT_LAMBDA_GRID, FitReport, fit, predict, score, tune_lambda
from .spectral import EigenSystem, approx_truncated_cross, truncated_gram

log = logging.getLogger(__name__)

#: Truncation levels (percent of the training-set size) swept by default.
DEFAULT_LEVELS: tuple[float, ...] = (
    0.1, 0.2, 0.5, 1.0, 2.0, 2.9, 3.8, 4.6, 5.5, 6.4, 7.2, 8.1, 9.0, 10.0,
    15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0,
    75.0, 80.0, 85.0, 90.0, 95.0, 100.0,
)

RIDGELESS_RANK_RTOL = 1e-12


def rank_of_level(level: float, n: int) -> int:
    """Percent level -> retained rank, rounding half up, floor 1."""
    if not (0.0 < level <= 100.0):
        raise ValidationError(f"truncation level must be in (0, 100], got {level}")
    q = level * n / 100.0
    # The tiny nudge makes decimal ties like 14.5 round up even when the
    # float product lands just below them.
    return max(1, min(n, int(math.floor(q + 0.5 + 1e-9))))


def sanitize_json(obj):
    """Recursively replace NaN/inf floats with None so reports are strict JSON."""
    if isinstance(obj, Mapping):
        return {k: sanitize_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize_json(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [sanitize_json(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# Fixed-split evaluation


@dataclass(frozen=True)
class PropertyEvaluation:
    property: str
    r2_mean: float
    r2_std: float
    mae_mean: float
    mae_std: float
    r2_trials: tuple[float, ...]
    mae_trials: tuple[float, ...]
    lambdas: tuple[float, ...]
    cv_tables: tuple[tuple[tuple[float, float], ...], ...]


@dataclass(frozen=True)
class EvaluationResult:
    per_property: tuple[PropertyEvaluation, ...]
    avg_r2: float
    trials: int
    seed: int

    @property
    def properties(self) -> tuple[str, ...]:
        return tuple(p.property for p in self.per_property)


def _evaluate_split(
    km: KernelMatrix,
    kx: CrossKernel,
    y_train: np.ndarray,
    y_test: np.ndarray,
    lambda_grid: Sequence[float],
    folds: int,
    cv_seed: int,
    standardize: bool,
) -> FitReport:
    report = tune_lambda(km, y_train, lambda_grid, folds, seed=cv_seed, standardize=standardize)
    model = fit(km, y_train, report.lambda_selected, standardize=standardize)
    scores = score(y_test, predict(model, kx))
    return report.completed(scores.r2, scores.mae)


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size <= 1:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


def evaluate(
    km: KernelMatrix,
    kx: CrossKernel,
    targets: TargetTable,
    properties: Sequence[str] | None = None,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 5,
    trials: int = 1,
    seed: int = 0,
    standardize: bool = False,
    jobs: int | None = 1,
) -> EvaluationResult:
    """Tuned KRR scores per property on one fixed train/test kernel pair.

    ``trials`` repeats the tuning with cross-validation fold seeds
    ``seed``, ``seed + 1``, ... on the same split; lambda is re-tuned per
    property and per trial.
    """
    _check_pair(km, kx)
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    props = tuple(properties) if properties is not None else targets.properties
    if not props:
        raise ValidationError("no properties requested")
    y_train = {p: targets.column(p, km.ids) for p in props}
    y_test = {p: targets.column(p, kx.test_ids) for p in props}

    grid_points = [(p, t) for p in props for t in range(trials)]
    reports = parallel_map(
        lambda pt: _evaluate_split(
            km, kx, y_train[pt[0]], y_test[pt[0]], lambda_grid, folds, seed + pt[1], standardize
        ),
        grid_points,
        jobs,
    )

    per_property: list[PropertyEvaluation] = []
    for i, prop in enumerate(props):
        block = reports[i * trials : (i + 1) * trials]
        r2_mean, r2_std = _mean_std([r.r2 for r in block])
        mae_mean, mae_std = _mean_std([r.mae for r in block])
        per_property.append(
            PropertyEvaluation(
                property=prop,
                r2_mean=r2_mean,
                r2_std=r2_std,
                mae_mean=mae_mean,
                mae_std=mae_std,
                r2_trials=tuple(r.r2 for r in block),
                mae_trials=tuple(r.mae for r in block),
                lambdas=tuple(r.lambda_selected for r in block),
                cv_tables=tuple(r.cv_table for r in block),
            )
        )
    avg_r2 = float(np.mean([p.r2_mean for p in per_property]))
    return EvaluationResult(tuple(per_property), avg_r2, trials, seed)


def _check_pair(km: KernelMatrix, kx: CrossKernel) -> None:
    if km.ids != kx.train_ids:
        raise ValidationError("Gram matrix and cross-kernel disagree on the training ids")
    if km.config != kx.config:
        raise ValidationError("Gram matrix and cross-kernel were built with different configs")


# ---------------------------------------------------------------------------
# Truncated KRR sweep


@dataclass(frozen=True)
class RecoveryThresholds:
    """Smallest levels reaching 95%/99% of a reference R^2 (NaN when unreached)."""

    pct95: float
    pct99: float
    pct95_vs_full: float
    pct99_vs_full: float


@dataclass(frozen=True)
class PropertySweep:
    property: str
    r2_by_level: tuple[float, ...]
    lambda_by_level: tuple[float, ...]
    failed_levels: tuple[float, ...]
    full_r2: float
    full_lambda: float
    thresholds: RecoveryThresholds


@dataclass(frozen=True)
class TruncationSweepResult:
    levels: tuple[float, ...]
    ranks: tuple[int, ...]
    regularized: bool
    seed: int
    per_property: tuple[PropertySweep, ...]

    @property
    def properties(self) -> tuple[str, ...]:
        return tuple(p.property for p in self.per_property)


def _standardizer(y: np.ndarray, standardize: bool) -> tuple[float, float]:
    if not standardize:
        return 0.0, 1.0
    std = float(y.std())
    return float(y.mean()), std if std > 0.0 else 1.0


def _tkrr_predict(
    eig: EigenSystem,
    r: int,
    y_train: np.ndarray,
    lam: float,
    kx_values: np.ndarray,
    standardize: bool = False,
) -> np.ndarray:
    """Truncated-KRR predictions through an (already projected) cross-kernel.

    Coefficients are solved in the eigenbasis, alpha = U_r (mu + lam)^-1
    U_r^T y, which for lam > 0 matches the ridge solve on the truncated
    Gram matrix and for lam = 0 is its pseudo-inverse limit.
    """
    mu_r = eig.mu[:r]
    mu1 = abs(float(eig.mu[0]))
    if lam == 0.0 and (mu_r[-1] <= 0.0 or mu_r[-1] <= RIDGELESS_RANK_RTOL * mu1):
        raise NumericalError(
            f"ridgeless truncated solve failed: eigenvalue {r} is numerically zero "
            f"({mu_r[-1]:.3e} vs leading {mu1:.3e}); use lambda > 0 or a smaller level"
        )
    denom = mu_r + lam
    if np.any(np.abs(denom) <= 1e-300):
        raise NumericalError("truncated solve hit a vanishing eigenvalue-plus-lambda denominator")
    y_mean, y_scale = _standardizer(y_train, standardize)
    yw = (y_train - y_mean) / y_scale
    ur = eig.U[:, :r]
    alpha = ur @ ((ur.T @ yw) / denom)
    return (kx_values.T @ alpha) * y_scale + y_mean


def recovery_threshold(
    levels: Sequence[float], r2_by_level: Sequence[float], fraction: float, reference: float
) -> float:
    """Smallest level whose R^2 reaches ``fraction * reference``; NaN if none does."""
    if not math.isfinite(reference):
        return math.nan
    target = fraction * reference
    for level, r2 in zip(levels, r2_by_level):
        if math.isfinite(r2) and r2 >= target:
            return float(level)
    return math.nan


def truncation_sweep(
    eig: EigenSystem,
    kx: CrossKernel,
    targets: TargetTable,
    levels: Sequence[float] = DEFAULT_LEVELS,
    regularized: bool = True,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 5,
    seed: int = 0,
    properties: Sequence[str] | None = None,
    standardize: bool = False,
    jobs: int | None = 1,
) -> TruncationSweepResult:
    """R^2 of truncated KRR across spectrum-retention levels.

    In regularized mode lambda is re-tuned per level by cross-validation
    on the truncated Gram matrix; in ridgeless mode lambda is fixed at 0
    and levels whose retained spectrum is numerically singular are
    recorded as failed (NaN) and excluded from the threshold search.
    The 100% level operates on the full reconstruction and the raw
    cross-kernel, so it reproduces ordinary KRR.
    """
    n = eig.n
    if kx.n_train != n:
        raise ValidationError("eigen system size does not match the cross-kernel training side")
    level_list = tuple(float(l) for l in levels)
    if not level_list:
        raise ValidationError("levels must be non-empty")
    if any(b <= a for a, b in zip(level_list, level_list[1:])):
        raise ValidationError("levels must be strictly increasing")
    ranks = tuple(rank_of_level(l, n) for l in level_list)
    props = tuple(properties) if properties is not None else targets.properties

    train_ids = kx.train_ids
    km_full = KernelMatrix(truncated_gram(eig, n), kx.config, train_ids)

    def run_property(prop: str) -> PropertySweep:
        y_tr = targets.column(prop, train_ids)
        y_te = targets.column(prop, kx.test_ids)

        full_lambda = 0.0
        if regularized:
            full_lambda = tune_lambda(
                km_full, y_tr, lambda_grid, folds, seed=seed, standardize=standardize
            ).lambda_selected
        try:
            full_pred = _tkrr_predict(eig, n, y_tr, full_lambda, kx.values, standardize)
            full_r2 = score(y_te, full_pred).r2
        except NumericalError as exc:
            log.warning("full-rank %s reference failed for %s: %s", "ridgeless" if not regularized else "KRR", prop, exc)
            full_r2 = math.nan

        def run_level(i: int) -> tuple[float, float]:
            r = ranks[i]
            lam = 0.0
            if regularized:
                km_r = km_full if r == n else KernelMatrix(truncated_gram(eig, r), kx.config, train_ids)
                try:
                    lam = tune_lambda(
                        km_r, y_tr, lambda_grid, folds, seed=seed, standardize=standardize
                    ).lambda_selected
                except NumericalError as exc:
                    log.warning("level %.1f%% (%s): lambda tuning failed: %s", level_list[i], prop, exc)
                    return math.nan, math.nan
            kx_vals = kx.values if r == n else approx_truncated_cross(eig, r, kx)
            try:
                pred = _tkrr_predict(eig, r, y_tr, lam, kx_vals, standardize)
            except NumericalError as exc:
                log.warning("level %.1f%% (%s) failed: %s", level_list[i], prop, exc)
                return math.nan, math.nan
            return score(y_te, pred).r2, lam

        level_rows = parallel_map(run_level, range(len(level_list)), jobs)
        r2s = tuple(row[0] for row in level_rows)
        lams = tuple(row[1] for row in level_rows)
        failed = tuple(l for l, r2 in zip(level_list, r2s) if not math.isfinite(r2))
        finite = [r2 for r2 in r2s if math.isfinite(r2)]
        best = max(finite) if finite else math.nan
        thresholds = RecoveryThresholds(
            pct95=recovery_threshold(level_list, r2s, 0.95, best),
            pct99=recovery_threshold(level_list, r2s, 0.99, best),
            pct95_vs_full=recovery_threshold(level_list, r2s, 0.95, full_r2),
            pct99_vs_full=recovery_threshold(level_list, r2s, 0.99, full_r2),
        )
        return PropertySweep(
            property=prop,
            r2_by_level=r2s,
            lambda_by_level=lams,
            failed_levels=failed,
            full_r2=full_r2,
            full_lambda=full_lambda,
            thresholds=thresholds,
        )

    per_property = tuple(parallel_map(run_property, props, jobs=1))
    return TruncationSweepResult(level_list, ranks, bool(regularized), seed, per_property)


# ---------------------------------------------------------------------------
# Metric-vs-performance correlation


@dataclass(frozen=True)
class MetricRow:
    """One (representation, kernel) pair's spectral metrics and average R^2."""

    representation: str
    kernel: str
    alpha: float
    sse: float
    intrinsic_dim: float
    stable_rank: float
    avg_r2: float


@dataclass(frozen=True)
class CorrelationEntry:
    metric: str
    r: float
    ci_low: float
    ci_high: float
    n_points: int


@dataclass(frozen=True)
class ScatterPoint:
    group: str
    representation: str
    kernel: str
    metric: str
    value: float
    avg_r2: float


@dataclass(frozen=True)
class CorrelationReport:
    groups: tuple[tuple[str, tuple[CorrelationEntry, ...]], ...]
    skipped_groups: tuple[str, ...]
    scatter: tuple[ScatterPoint, ...] = field(repr=False)


CORRELATION_METRICS = ("neg_alpha", "sse", "id", "sr")


def _metric_value(row: MetricRow, metric: str) -> float:
    if metric == "neg_alpha":
        return -row.alpha
    if metric == "sse":
        return row.sse
    if metric == "id":
        return row.intrinsic_dim
    if metric == "sr":
        return row.stable_rank
    raise ValidationError(f"unknown correlation metric {metric!r}")


def pearson_ci(xs, ys) -> tuple[float, float, float]:
    """Pearson r with a 95% Fisher-z confidence interval (z +/- 1.96/sqrt(m-3))."""
    x = np.ascontiguousarray(xs, dtype=np.float64)
    y = np.ascontiguousarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson_ci expects two equal-length 1-d arrays")
    m = x.shape[0]
    if m < 4:
        raise ValidationError(f"need at least 4 points for the Fisher interval, got {m}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("pearson_ci inputs contain non-finite values")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise ValidationError("correlation is undefined for a constant input")
    r = float(xc @ yc) / denom
    r = max(-1.0, min(1.0, r))
    if abs(r) >= 1.0:
        return r, r, r
    half = 1.96 / math.sqrt(m - 3)
    z = math.atanh(r)
    return r, math.tanh(z - half), math.tanh(z + half)


def correlate_metrics(
    rows: Sequence[MetricRow], grouping: Mapping[str, str] | None = None
) -> CorrelationReport:
    """Correlate each spectral metric (alpha negated) with average R^2, per group.

    ``grouping`` maps representation names to group labels; rows with an
    unmapped representation are dropped with a warning, and groups with
    fewer than 4 rows are skipped (no interval is estimable there).
    """
    grouped: dict[str, list[MetricRow]] = {}
    for row in rows:
        if grouping is None:
            group = "all"
        else:
            group = grouping.get(row.representation)
            if group is None:
                log.warning("representation %r missing from the grouping; row dropped", row.representation)
                continue
        grouped.setdefault(group, []).append(row)

    entries: list[tuple[str, tuple[CorrelationEntry, ...]]] = []
    skipped: list[str] = []
    scatter: list[ScatterPoint] = []
    for group in sorted(grouped):
        members = grouped[group]
        for row in members:
            for metric in CORRELATION_METRICS:
                scatter.append(
                    ScatterPoint(group, row.representation, row.kernel, metric, _metric_value(row, metric), row.avg_r2)
                )
        if len(members) < 4:
            log.warning("group %r has %d rows (< 4); skipped", group, len(members))
            skipped.append(group)
            continue
        group_entries: list[CorrelationEntry] = []
        for metric in CORRELATION_METRICS:
            pairs = [
                (_metric_value(row, metric), row.avg_r2)
                for row in members
                if math.isfinite(_metric_value(row, metric)) and math.isfinite(row.avg_r2)
            ]
            if len(pairs) < 4:
                log.warning("group %r metric %s has %d finite rows (< 4); interval omitted", group, metric, len(pairs))
                group_entries.append(CorrelationEntry(metric, math.nan, math.nan, math.nan, len(pairs)))
                continue
            xs = [p[0] for p in pairs]
            ys = [p[1] for p in pairs]
            try:
                r, lo, hi = pearson_ci(xs, ys)
            except ValidationError as exc:
                log.warning("group %r metric %s: %s", group, metric, exc)
                group_entries.append(CorrelationEntry(metric, math.nan, math.nan, math.nan, len(pairs)))
                continue
            group_entries.append(CorrelationEntry(metric, r, lo, hi, len(pairs)))
        entries.append((group, tuple(group_entries)))
    return CorrelationReport(tuple(entries), tuple(skipped), tuple(scatter))


# ---------------------------------------------------------------------------
# Learning curves


@dataclass(frozen=True)
class LearningCurveResult:
    config: KernelConfig
    sizes: tuple[int, ...]
    seeds: tuple[int, ...]
    properties: tuple[str, ...]
    mae_mean: tuple[tuple[float, ...], ...]  # [property][size]
    mae_by_seed: tuple[tuple[tuple[float, ...], ...], ...]  # [property][size][seed]
    r2_mean: tuple[tuple[float, ...], ...]  # [property][size]


def learning_curve(
    dataset,
    config: KernelConfig,
    targets: TargetTable,
    sizes: Sequence[int],
    test_size: int,
    seeds: Sequence[int],
    properties: Sequence[str] | None = None,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 5,
    standardize: bool = False,
    jobs: int | None = 1,
) -> LearningCurveResult:
    """Mean test MAE against training-set size, averaged over fresh splits.

    For every (size, seed) pair a fresh disjoint split is drawn with
    ``make_split``; lambda is re-tuned on each training set with CV seed
    equal to the split seed.
    """
    size_list = tuple(int(s) for s in sizes)
    seed_list = tuple(int(s) for s in seeds)
    if not size_list:
        raise ValidationError("sizes must be non-empty")
    if any(b <= a for a, b in zip(size_list, size_list[1:])) or size_list[0] < 1:
        raise ValidationError("sizes must be positive and strictly increasing")
    if not seed_list:
        raise ValidationError("seeds must be non-empty")
    if test_size < 1:
        raise ValidationError("test_size must be >= 1")
    if size_list[-1] + test_size > dataset.n:
        raise ValidationError(
            f"largest size {size_list[-1]} + test_size {test_size} exceeds the pool of {dataset.n}"
        )
    props = tuple(properties) if properties is not None else targets.properties

    grid_points = [(size, seed) for size in size_list for seed in seed_list]

    def run_point(point: tuple[int, int]) -> dict[str, tuple[float, float]]:
        size, seed = point
        split = make_split(dataset.ids, size, test_size, seed)
        train_ds = dataset.subset(split.train_ids)
        test_ds = dataset.subset(split.test_ids)
        km = build_gram(train_ds, config)
        kxv = build_cross(train_ds, test_ds, config)
        out: dict[str, tuple[float, float]] = {}
        for prop in props:
            report = _evaluate_split(
                km,
                kxv,
                targets.column(prop, split.train_ids),
                targets.column(prop, split.test_ids),
                lambda_grid,
                folds,
                seed,
                standardize,
            )
            out[prop] = (report.mae, report.r2)
        return out

    results = parallel_map(run_point, grid_points, jobs)
    n_seeds = len(seed_list)
    mae_mean: list[tuple[float, ...]] = []
    mae_by_seed: list[tuple[tuple[float, ...], ...]] = []
    r2_mean: list[tuple[float, ...]] = []
    for prop in props:
        prop_means: list[float] = []
        prop_seeds: list[tuple[float, ...]] = []
        prop_r2: list[float] = []
        for si in range(len(size_list)):
            block = results[si * n_seeds : (si + 1) * n_seeds]
            maes = tuple(point[prop][0] for point in block)
            r2s = tuple(point[prop][1] for point in block)
            prop_means.append(float(np.mean(maes)))
            prop_seeds.append(maes)
            prop_r2.append(float(np.mean(r2s)))
        mae_mean.append(tuple(prop_means))
        mae_by_seed.append(tuple(prop_seeds))
        r2_mean.append(tuple(prop_r2))
    return LearningCurveResult(
        config=config,
        sizes=size_list,
        seeds=seed_list,
        properties=props,
        mae_mean=tuple(mae_mean),
        mae_by_seed=tuple(mae_by_seed),
        r2_mean=tuple(r2_mean),
    )
