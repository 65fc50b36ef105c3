"""Eigendecomposition, truncation and spectral-richness metrics."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molkern.errors import ValidationError
from molkern.spectral import (
    EigenSystem,
    approx_truncated_cross,
    eigendecompose,
    power_law_alpha,
    spectral_metrics,
    spectral_rank,
    spectrum_report,
    truncated_gram,
    truncated_spectrum,
)
from molkern.synthetic import power_law_spectrum, random_spd_kernel


def test_eigendecompose_identity():
    eig = eigendecompose(np.eye(3))
    assert np.allclose(eig.mu, [1.0, 1.0, 1.0], rtol=0, atol=1e-14)
    assert np.allclose(eig.U @ eig.U.T, np.eye(3), atol=1e-14)


def test_eigendecompose_reconstructs(rng):
    km = random_spd_kernel(25, seed=6)
    eig = eigendecompose(km)
    assert np.all(np.diff(eig.mu) <= 0)
    recon = (eig.U * eig.mu) @ eig.U.T
    assert np.allclose(recon, km.values, rtol=0, atol=1e-10)
    assert np.allclose(eig.U.T @ eig.U, np.eye(25), atol=1e-12)


def test_eigendecompose_rejects_asymmetric():
    with pytest.raises(ValidationError, match="not symmetric"):
        eigendecompose(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_eigendecompose_warns_on_indefinite(caplog):
    with caplog.at_level("WARNING", logger="molkern.spectral"):
        eig = eigendecompose(np.diag([1.0, -1.0]))
    assert eig.mu[-1] == pytest.approx(-1.0)
    assert any("positive semidefinite" in r.message for r in caplog.records)


def test_eigen_system_rejects_unsorted():
    with pytest.raises(ValidationError, match="descending"):
        EigenSystem(np.array([1.0, 2.0]), np.eye(2))


def test_truncated_gram_matches_direct_reconstruction():
    km = random_spd_kernel(30, seed=4)
    eig = eigendecompose(km)
    # independent oracle straight from numpy's eigendecomposition
    w, v = np.linalg.eigh(km.values)
    for r in (1, 7, 15, 30):
        top = np.argsort(w)[::-1][:r]
        oracle = (v[:, top] * w[top]) @ v[:, top].T
        tr = truncated_gram(eig, r)
        assert np.allclose(tr, oracle, rtol=0, atol=1e-10)
        assert np.array_equal(tr, tr.T)
    assert np.allclose(truncated_gram(eig, 30), km.values, rtol=0, atol=1e-10)


def test_truncation_identity_on_training_points():
    km = random_spd_kernel(40, seed=10)
    eig = eigendecompose(km)
    for r in (1, 10, 20, 40):
        projected = approx_truncated_cross(eig, r, km.values)
        assert np.allclose(projected, truncated_gram(eig, r), rtol=0, atol=1e-10)


def test_full_rank_projection_is_identity(rng):
    km = random_spd_kernel(30, seed=2)
    eig = eigendecompose(km)
    kx = rng.standard_normal((30, 12))
    assert np.allclose(approx_truncated_cross(eig, 30, kx), kx, rtol=0, atol=1e-12)


def test_truncation_rank_bounds():
    eig = eigendecompose(np.eye(4))
    for bad in (0, 5, -1):
        with pytest.raises(ValidationError, match="rank"):
            truncated_gram(eig, bad)
    with pytest.raises(ValidationError, match="rows"):
        approx_truncated_cross(eig, 2, np.zeros((3, 2)))


# ---------------------------------------------------------------------------
# Power-law exponent


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.3])
def test_power_law_recovery(alpha):
    mu = power_law_spectrum(200, alpha)
    assert power_law_alpha(mu) == pytest.approx(alpha, abs=1e-8)


def test_power_law_filter_drops_tiny_tail():
    mu = np.array([1.0, 0.5, 1e-20, 0.0])
    # only the first two survive: slope over (log 1, log 2) is exactly -1
    assert power_law_alpha(mu) == pytest.approx(1.0, abs=1e-12)


def test_power_law_needs_two_survivors():
    with pytest.raises(ValidationError, match="fewer than 2"):
        power_law_alpha([1.0, 1e-15, 1e-16])
    with pytest.raises(ValidationError, match="positive leading"):
        power_law_alpha([0.0, 0.0])


def test_power_law_flat_spectrum_is_zero():
    assert power_law_alpha(np.ones(50)) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Ratio metrics


def test_metric_hand_values():
    m = spectral_metrics([4.0, 1.0])
    assert m.sse == pytest.approx(1.6493848884661177, abs=1e-15)
    assert m.intrinsic_dim == pytest.approx(1.25, abs=1e-15)
    assert m.stable_rank == pytest.approx(1.0625, abs=1e-15)


def test_metrics_flat_spectrum_hits_upper_bound():
    m = spectral_metrics(np.ones(10))
    assert m.sse == pytest.approx(10.0, abs=1e-9)
    assert m.intrinsic_dim == pytest.approx(10.0, abs=1e-12)
    assert m.stable_rank == pytest.approx(10.0, abs=1e-12)


def test_metrics_rank_one_hits_lower_bound():
    m = spectral_metrics([5.0, 0.0, 0.0])
    assert m.sse == 1.0
    assert m.intrinsic_dim == 1.0
    assert m.stable_rank == 1.0


def test_metrics_clamp_negative_entries():
    clamped = spectral_metrics([4.0, 1.0, -0.1])
    reference = spectral_metrics([4.0, 1.0])
    assert clamped == reference


def test_metrics_reject_zero_spectrum():
    with pytest.raises(ValidationError, match="all-zero"):
        spectral_metrics([0.0, -1.0])
    with pytest.raises(ValidationError, match="empty"):
        spectral_metrics([])
    with pytest.raises(ValidationError, match="non-finite"):
        spectral_metrics([1.0, np.nan])


def test_spectral_rank_counts_positives():
    assert spectral_rank([4.0, 1.0, 0.0, -2.0]) == 2
    assert spectral_rank(np.ones(7)) == 7


@settings(max_examples=100, deadline=None)
@given(
    spec=st.lists(st.floats(min_value=0.0, max_value=1e6, allow_nan=False), min_size=1, max_size=40).filter(
        lambda s: max(s) > 0.0
    )
)
def test_metric_ordering_invariants(spec):
    m = spectral_metrics(spec)
    n = len(spec)
    rank = spectral_rank(spec)
    slack = 1e-9
    assert 1.0 - slack <= m.stable_rank <= m.intrinsic_dim + slack
    assert m.intrinsic_dim <= rank + slack * rank
    assert rank <= n
    assert 1.0 - slack <= m.sse <= n + slack * n


# ---------------------------------------------------------------------------
# Truncated spectrum window and the combined report


def test_truncated_spectrum_window():
    spec = np.arange(10.0, 0.0, -1.0)  # 10, 9, ..., 1
    window = truncated_spectrum(spec)
    assert np.array_equal(window, [7.0, 6.0])
    assert truncated_spectrum(np.arange(8.0, 0.0, -1.0)).shape == (1,)
    with pytest.raises(ValidationError, match="n >= 8"):
        truncated_spectrum(np.ones(7))


def test_truncated_window_sorts_input():
    spec = np.array([1.0, 10.0, 2.0, 9.0, 3.0, 8.0, 4.0, 7.0, 5.0, 6.0])
    assert np.array_equal(truncated_spectrum(spec), [7.0, 6.0])


def test_flat_truncated_block():
    report = spectrum_report(np.ones(10))
    assert report.truncated is not None
    assert report.truncated.sse == pytest.approx(2.0, abs=1e-12)
    assert report.truncated.intrinsic_dim == pytest.approx(2.0, abs=1e-12)
    assert report.truncated.stable_rank == pytest.approx(2.0, abs=1e-12)
    assert report.truncated.alpha == pytest.approx(0.0, abs=1e-12)


def test_spectrum_report_small_n_drops_truncated(caplog):
    with caplog.at_level("WARNING", logger="molkern.spectral"):
        report = spectrum_report([4.0, 2.0, 1.0])
    assert report.truncated is None
    assert report.n == 3
    assert report.min_eigenvalue == 1.0
    assert math.isfinite(report.full.sse)
    assert any("truncated metric block skipped" in r.message for r in caplog.records)


def test_spectrum_report_alpha_nan_when_not_computable():
    # rank-1 spectrum: alpha has one survivor, the ratio metrics still work
    report = spectrum_report([3.0, 0.0, 0.0])
    assert math.isnan(report.full.alpha)
    assert report.full.intrinsic_dim == 1.0


def test_spectrum_report_on_kernel(rng):
    eig = eigendecompose(random_spd_kernel(20, seed=3))
    report = spectrum_report(eig.mu)
    assert report.n == 20
    assert report.truncated is not None
    assert report.full.intrinsic_dim >= report.full.stable_rank
