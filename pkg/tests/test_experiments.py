"""Experiment drivers: evaluation, truncation sweep, correlation, learning curves."""

from __future__ import annotations

import math

import numpy as np
import pytest

from molkern.dataset_io import make_split
from molkern.errors import ValidationError
from molkern.experiments import (
    DEFAULT_LEVELS,
    MetricRow,
    correlate_metrics,
    evaluate,
    learning_curve,
    pearson_ci,
    rank_of_level,
    recovery_threshold,
    sanitize_json,
    truncation_sweep,
)
from molkern.kernels import KernelConfig, cross, gram
from molkern.regression import fit, predict, score, tune_lambda
from molkern.spectral import eigendecompose
from molkern.synthetic import low_rank_linear_fixture

GRID = (1e-8, 1e-4, 1e-2)


# ---------------------------------------------------------------------------
# Level arithmetic and JSON sanitizing


def test_rank_of_level_rounding():
    assert rank_of_level(0.1, 500) == 1
    assert rank_of_level(0.2, 500) == 1
    assert rank_of_level(0.5, 500) == 3  # 2.5 rounds half up
    assert rank_of_level(2.0, 500) == 10
    assert rank_of_level(2.9, 500) == 15  # 14.5, the tie goes up
    assert rank_of_level(50.0, 10) == 5
    assert rank_of_level(100.0, 777) == 777
    assert rank_of_level(0.001, 100) == 1  # floor at one eigenvalue
    assert rank_of_level(0.25, 1000) == 3


def test_rank_of_level_bounds():
    for bad in (0.0, -1.0, 100.5):
        with pytest.raises(ValidationError, match="level"):
            rank_of_level(bad, 100)


def test_default_levels_shape():
    assert len(DEFAULT_LEVELS) == 32
    assert DEFAULT_LEVELS[0] == 0.1 and DEFAULT_LEVELS[-1] == 100.0
    assert all(b > a for a, b in zip(DEFAULT_LEVELS, DEFAULT_LEVELS[1:]))


def test_sanitize_json():
    payload = {
        "a": math.nan,
        "b": [math.inf, 1.0, -math.inf],
        "c": np.float64(2.5),
        "d": np.array([1.0, math.nan]),
        "e": {"n": np.int64(3)},
        "f": "text",
    }
    out = sanitize_json(payload)
    assert out == {"a": None, "b": [None, 1.0, None], "c": 2.5, "d": [1.0, None], "e": {"n": 3}, "f": "text"}


# ---------------------------------------------------------------------------
# Recovery thresholds


def test_recovery_threshold_arithmetic():
    levels = (1.0, 2.0, 3.0, 4.0, 5.0)
    r2s = (0.5, 0.94, 0.949, 0.951, 0.99)
    assert recovery_threshold(levels, r2s, 0.95, 1.0) == 4.0
    assert recovery_threshold(levels, r2s, 0.99, 1.0) == 5.0
    assert recovery_threshold(levels, r2s, 0.5, 1.0) == 1.0
    assert math.isnan(recovery_threshold(levels, r2s, 1.0, 1.0))
    assert math.isnan(recovery_threshold(levels, r2s, 0.95, math.nan))


def test_recovery_threshold_skips_failed_levels():
    levels = (1.0, 2.0, 3.0)
    r2s = (math.nan, 0.99, 0.999)
    assert recovery_threshold(levels, r2s, 0.95, 1.0) == 2.0


# ---------------------------------------------------------------------------
# Fixed-split evaluation


@pytest.fixture(scope="module")
def small_problem(feature_pool):
    ds, targets = feature_pool
    split = make_split(ds.ids, 40, 30, seed=0)
    cfg = KernelConfig("gaussian", sigma_l=100.0)
    train, test = ds.subset(split.train_ids), ds.subset(split.test_ids)
    km = gram(train, cfg)
    kx = cross(train, test, cfg)
    return km, kx, targets, split


def test_evaluate_matches_manual_pipeline(small_problem):
    km, kx, targets, split = small_problem
    result = evaluate(km, kx, targets, properties=("u0",), lambda_grid=GRID, folds=4, seed=0)
    pe = result.per_property[0]

    y_tr = targets.column("u0", split.train_ids)
    y_te = targets.column("u0", split.test_ids)
    report = tune_lambda(km, y_tr, GRID, folds=4, seed=0)
    model = fit(km, y_tr, report.lambda_selected)
    expected = score(y_te, predict(model, kx))

    assert pe.lambdas == (report.lambda_selected,)
    assert pe.r2_mean == expected.r2
    assert pe.mae_mean == expected.mae
    assert result.avg_r2 == pe.r2_mean


def test_evaluate_all_properties_and_average(small_problem):
    km, kx, targets, _ = small_problem
    result = evaluate(km, kx, targets, lambda_grid=GRID, folds=4)
    assert result.properties == targets.properties
    assert result.avg_r2 == pytest.approx(np.mean([p.r2_mean for p in result.per_property]))


def test_evaluate_trials_vary_cv_seed_only(small_problem):
    km, kx, targets, _ = small_problem
    result = evaluate(km, kx, targets, properties=("gap",), lambda_grid=GRID, folds=4, trials=3, seed=5)
    pe = result.per_property[0]
    assert len(pe.r2_trials) == 3 and len(pe.cv_tables) == 3
    # a single-value grid makes every trial pick the same lambda and model
    single = evaluate(km, kx, targets, properties=("gap",), lambda_grid=(1e-4,), folds=4, trials=2)
    r2s = single.per_property[0].r2_trials
    assert r2s[0] == r2s[1]
    assert single.per_property[0].r2_std == 0.0


def test_evaluate_parallel_matches_serial(small_problem):
    km, kx, targets, _ = small_problem
    serial = evaluate(km, kx, targets, lambda_grid=GRID, folds=4, jobs=1)
    parallel = evaluate(km, kx, targets, lambda_grid=GRID, folds=4, jobs=4)
    assert serial == parallel


def test_evaluate_input_guards(small_problem):
    km, kx, targets, _ = small_problem
    with pytest.raises(ValidationError, match="trials"):
        evaluate(km, kx, targets, trials=0)
    with pytest.raises(ValidationError, match="no properties"):
        evaluate(km, kx, targets, properties=())
    with pytest.raises(ValidationError, match="training ids"):
        evaluate(km, cross_with_wrong_train(km, kx), targets)


def cross_with_wrong_train(km, kx):
    from molkern.kernels import CrossKernel

    wrong = tuple(reversed(km.ids))
    return CrossKernel(kx.values, kx.config, wrong, kx.test_ids)


# ---------------------------------------------------------------------------
# Truncation sweep


def test_sweep_full_level_reproduces_plain_krr(small_problem):
    km, kx, targets, split = small_problem
    eig = eigendecompose(km)
    sweep = truncation_sweep(
        eig, kx, targets, levels=(50.0, 100.0), regularized=True, lambda_grid=GRID, folds=4, seed=0,
        properties=("u0",),
    )
    ps = sweep.per_property[0]
    assert sweep.ranks == (20, 40)
    # the 100% level and the full-KRR reference are the same computation
    assert ps.r2_by_level[1] == ps.full_r2
    assert ps.lambda_by_level[1] == ps.full_lambda

    # and both agree with the ordinary tuned-KRR pipeline
    y_tr = targets.column("u0", split.train_ids)
    y_te = targets.column("u0", split.test_ids)
    lam = tune_lambda(km, y_tr, GRID, folds=4, seed=0).lambda_selected
    expected = score(y_te, predict(fit(km, y_tr, lam), kx)).r2
    assert ps.full_lambda == lam
    assert ps.full_r2 == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_sweep_ridgeless_flags_rank_deficient_levels():
    ds, targets = low_rank_linear_fixture(80, rank=6, d=16, seed=21)
    split = make_split(ds.ids, 40, 30, seed=0)
    cfg = KernelConfig("linear")
    train, test = ds.subset(split.train_ids), ds.subset(split.test_ids)
    eig = eigendecompose(gram(train, cfg))
    kx = cross(train, test, cfg)
    sweep = truncation_sweep(eig, kx, targets, levels=(10.0, 50.0, 100.0), regularized=False)
    ps = sweep.per_property[0]
    # rank 4 fits inside the true rank of 6; ranks 20 and 40 do not
    assert sweep.ranks == (4, 20, 40)
    assert math.isfinite(ps.r2_by_level[0])
    assert ps.failed_levels == (50.0, 100.0)
    assert math.isnan(ps.r2_by_level[1]) and math.isnan(ps.r2_by_level[2])
    # thresholds fall back to the only finite level
    assert ps.thresholds.pct95 == 10.0
    assert all(lam == 0.0 for lam in ps.lambda_by_level if not math.isnan(lam))


def test_sweep_ridgeless_recovers_target_in_column_space():
    ds, targets = low_rank_linear_fixture(80, rank=6, d=16, seed=21)
    split = make_split(ds.ids, 40, 30, seed=0)
    cfg = KernelConfig("linear")
    train, test = ds.subset(split.train_ids), ds.subset(split.test_ids)
    eig = eigendecompose(gram(train, cfg))
    kx = cross(train, test, cfg)
    sweep = truncation_sweep(eig, kx, targets, levels=(15.0,), regularized=False)
    # rank 6 == the true rank: the noiseless linear target is recovered exactly
    assert sweep.ranks == (6,)
    assert sweep.per_property[0].r2_by_level[0] == pytest.approx(1.0, abs=1e-8)


def test_sweep_monotone_improvement_on_smooth_problem(small_problem):
    km, kx, targets, _ = small_problem
    eig = eigendecompose(km)
    sweep = truncation_sweep(
        eig, kx, targets, levels=(5.0, 20.0, 100.0), regularized=True, lambda_grid=GRID, folds=4,
        properties=("u0",), jobs=3,
    )
    r2s = sweep.per_property[0].r2_by_level
    assert r2s[0] < r2s[1] <= r2s[2] + 0.05


def test_sweep_level_validation(small_problem):
    km, kx, targets, _ = small_problem
    eig = eigendecompose(km)
    with pytest.raises(ValidationError, match="strictly increasing"):
        truncation_sweep(eig, kx, targets, levels=(50.0, 50.0))
    with pytest.raises(ValidationError, match="non-empty"):
        truncation_sweep(eig, kx, targets, levels=())


# ---------------------------------------------------------------------------
# Correlation


def _rows(n, metric_values, r2_values, rep_prefix="rep"):
    rows = []
    for i in range(n):
        v = metric_values[i]
        rows.append(
            MetricRow(
                representation=f"{rep_prefix}{i}",
                kernel="gaussian",
                alpha=-v,  # neg_alpha == v
                sse=v,
                intrinsic_dim=v,
                stable_rank=v,
                avg_r2=r2_values[i],
            )
        )
    return rows


def test_correlate_perfect_linear_relation():
    xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    rows = _rows(6, xs, [2 * x + 1 for x in xs])
    report = correlate_metrics(rows)
    assert report.skipped_groups == ()
    (group, entries), = report.groups
    assert group == "all"
    for entry in entries:
        assert entry.metric in ("neg_alpha", "sse", "id", "sr")
        assert entry.r == pytest.approx(1.0, abs=1e-12)
        assert entry.ci_low == entry.r and entry.ci_high == entry.r  # degenerate interval at |r| = 1
        assert entry.n_points == 6


def test_correlate_grouping_and_skips(caplog):
    xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    rows = _rows(6, xs, [2 * x + 1 for x in xs], rep_prefix="a") + _rows(2, [1.0, 2.0], [0.1, 0.2], rep_prefix="b")
    grouping = {f"a{i}": "big" for i in range(6)}
    grouping.update({"b0": "small", "b1": "small"})
    with caplog.at_level("WARNING", logger="molkern.experiments"):
        report = correlate_metrics(rows, grouping)
    assert report.skipped_groups == ("small",)
    assert [g for g, _ in report.groups] == ["big"]
    # scatter keeps every grouped row, one point per metric
    assert len(report.scatter) == 4 * 8


def test_correlate_drops_unmapped_rows(caplog):
    rows = _rows(5, [1.0, 2.0, 3.0, 4.0, 5.0], [0.1, 0.2, 0.3, 0.4, 0.5])
    grouping = {f"rep{i}": "g" for i in range(4)}  # rep4 unmapped
    with caplog.at_level("WARNING", logger="molkern.experiments"):
        report = correlate_metrics(rows, grouping)
    (group, entries), = report.groups
    assert entries[0].n_points == 4
    assert any("missing from the grouping" in r.message for r in caplog.records)


def test_correlate_nan_metric_entries():
    xs = [1.0, 2.0, 3.0, 4.0, 5.0]
    rows = _rows(5, xs, [0.5, 0.6, 0.7, 0.8, 0.9])
    # knock alpha out for two rows: only 3 finite pairs remain for neg_alpha
    rows[0] = MetricRow("rep0", "gaussian", math.nan, 1.0, 1.0, 1.0, 0.5)
    rows[1] = MetricRow("rep1", "gaussian", math.nan, 2.0, 2.0, 2.0, 0.6)
    report = correlate_metrics(rows)
    entries = {e.metric: e for e in report.groups[0][1]}
    assert math.isnan(entries["neg_alpha"].r)
    assert entries["neg_alpha"].n_points == 3
    assert math.isfinite(entries["sse"].r)


def test_correlate_constant_metric_gives_nan():
    rows = _rows(5, [2.0] * 5, [0.1, 0.2, 0.3, 0.4, 0.5])
    report = correlate_metrics(rows)
    for entry in report.groups[0][1]:
        assert math.isnan(entry.r)
        assert entry.n_points == 5


# ---------------------------------------------------------------------------
# Pearson r with Fisher interval


def test_pearson_matches_numpy(rng):
    x = rng.standard_normal(50)
    y = 0.3 * x + rng.standard_normal(50)
    r, lo, hi = pearson_ci(x, y)
    assert r == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)
    assert lo < r < hi


def test_pearson_ci_hand_values():
    # Mix the centered x direction with an orthogonal unit vector so the
    # correlation is exactly 0.5 at m = 12; the Fisher interval is then
    # tanh(atanh(0.5) -/+ 1.96/3).
    x = np.arange(12.0)
    xc = x - x.mean()
    ortho = np.zeros(12)
    ortho[0], ortho[1] = 1.0, -1.0
    ortho -= (ortho @ xc) / (xc @ xc) * xc
    u = xc / math.sqrt(float(xc @ xc))
    w = ortho / math.sqrt(float(ortho @ ortho))
    y = 0.5 * u + math.sqrt(0.75) * w
    r, lo, hi = pearson_ci(x, y)
    assert r == pytest.approx(0.5, abs=1e-12)
    assert lo == pytest.approx(-0.10365355742117564, abs=1e-9)
    assert hi == pytest.approx(0.8344579309704545, abs=1e-9)


def test_pearson_degenerate_and_errors():
    x = [1.0, 2.0, 3.0, 4.0]
    r, lo, hi = pearson_ci(x, [2.0, 4.0, 6.0, 8.0])
    assert (r, lo, hi) == (1.0, 1.0, 1.0)
    r, lo, hi = pearson_ci(x, [-1.0, -2.0, -3.0, -4.0])
    assert (r, lo, hi) == (-1.0, -1.0, -1.0)
    with pytest.raises(ValidationError, match="at least 4"):
        pearson_ci([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValidationError, match="constant"):
        pearson_ci(x, [5.0, 5.0, 5.0, 5.0])
    with pytest.raises(ValidationError, match="non-finite"):
        pearson_ci(x, [1.0, 2.0, math.nan, 4.0])


# ---------------------------------------------------------------------------
# Learning curves


def test_learning_curve_consistent_with_evaluate(feature_pool):
    ds, targets = feature_pool
    cfg = KernelConfig("gaussian", sigma_l=100.0)
    curve = learning_curve(
        ds, cfg, targets, sizes=(30,), test_size=20, seeds=(0,), properties=("u0",),
        lambda_grid=GRID, folds=4,
    )
    split = make_split(ds.ids, 30, 20, seed=0)
    train, test = ds.subset(split.train_ids), ds.subset(split.test_ids)
    km = gram(train, cfg)
    kx = cross(train, test, cfg)
    result = evaluate(km, kx, targets, properties=("u0",), lambda_grid=GRID, folds=4, seed=0)
    assert curve.mae_mean[0][0] == result.per_property[0].mae_mean
    assert curve.r2_mean[0][0] == result.per_property[0].r2_mean


def test_learning_curve_shapes_and_averaging(feature_pool):
    ds, targets = feature_pool
    cfg = KernelConfig("gaussian", sigma_l=100.0)
    curve = learning_curve(
        ds, cfg, targets, sizes=(20, 40), test_size=25, seeds=(0, 1), properties=("u0", "gap"),
        lambda_grid=(1e-4,), folds=4, jobs=4,
    )
    assert curve.sizes == (20, 40)
    assert curve.properties == ("u0", "gap")
    assert len(curve.mae_by_seed[0]) == 2  # sizes
    assert len(curve.mae_by_seed[0][0]) == 2  # seeds
    for pi in range(2):
        for si in range(2):
            assert curve.mae_mean[pi][si] == pytest.approx(np.mean(curve.mae_by_seed[pi][si]))
    # more training data helps on the smooth backbone target
    assert curve.mae_mean[0][1] < curve.mae_mean[0][0]


def test_learning_curve_validation(feature_pool):
    ds, targets = feature_pool
    cfg = KernelConfig("gaussian", sigma_l=100.0)
    with pytest.raises(ValidationError, match="strictly increasing"):
        learning_curve(ds, cfg, targets, sizes=(30, 20), test_size=10, seeds=(0,))
    with pytest.raises(ValidationError, match="exceeds the pool"):
        learning_curve(ds, cfg, targets, sizes=(70,), test_size=20, seeds=(0,))
    with pytest.raises(ValidationError, match="seeds"):
        learning_curve(ds, cfg, targets, sizes=(20,), test_size=10, seeds=())
