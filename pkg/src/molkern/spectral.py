"""Eigendecomposition, spectral truncation and spectral-richness metrics.

The truncated kernel keeps the top-r eigenpairs of the training Gram
matrix; ``approx_truncated_cross`` projects a raw train-by-test
cross-kernel onto that eigenspace, which reproduces the truncated kernel
exactly on the training points and converges to the raw kernel as r
approaches n.

Four scalar metrics summarize how rich a spectrum is: the power-law
decay exponent alpha (negated log-log OLS slope), the spectral Shannon
entropy SSE, the intrinsic dimension ID and the stable rank SR.  The
truncated variants drop the top three eigenvalues and keep the rest of
the top half (positions 4 .. floor(n/2) of the sorted spectrum).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kernels import CrossKernel, KernelMatrix

log = logging.getLogger(__name__)

PSD_RTOL = 1e-8
ALPHA_FILTER_RTOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (descending) and matching orthonormal eigenvectors."""

    mu: np.ndarray  # (n,)
    U: np.ndarray  # (n, n), column k pairs with mu[k]

    def __post_init__(self) -> None:
        mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        u = np.ascontiguousarray(self.U, dtype=np.float64)
        if mu.ndim != 1 or u.ndim != 2 or u.shape != (mu.shape[0], mu.shape[0]):
            raise ValidationError("eigen system shapes are inconsistent")
        if np.any(np.diff(mu) > 0):
            raise ValidationError("eigenvalues must be sorted in descending order")
        mu.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "U", u)

    @property
    def n(self) -> int:
        return self.mu.shape[0]


def _as_symmetric_values(k: KernelMatrix | np.ndarray) -> np.ndarray:
    if isinstance(k, KernelMatrix):
        return k.values
    values = np.ascontiguousarray(k, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValidationError("expected a square matrix")
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if float(np.max(np.abs(values - values.T))) > 1e-12 * max(scale, 1.0):
        raise ValidationError("matrix is not symmetric")
    return values


def eigendecompose(k: KernelMatrix | np.ndarray) -> EigenSystem:
    """Full symmetric eigendecomposition, eigenvalues descending.

    Eigenvalues below -1e-8 * mu_1 trigger a PSD warning; they are kept
    raw here and clamped to zero only inside the metric computations.
    """
    values = _as_symmetric_values(k)
    w, v = np.linalg.eigh(values)
    mu = w[::-1].copy()
    u = v[:, ::-1].copy()
    if mu.size and mu[-1] < -PSD_RTOL * abs(mu[0]):
        log.warning(
            "kernel matrix is not positive semidefinite: min eigenvalue %.3e vs max %.3e",
            mu[-1],
            mu[0],
        )
    return EigenSystem(mu, u)


def truncated_gram(eig: EigenSystem, r: int) -> np.ndarray:
    """Reconstruct the rank-r truncated Gram matrix (exactly symmetric)."""
    r = _check_rank(eig, r)
    ur = eig.U[:, :r]
    full = (ur * eig.mu[:r]) @ ur.T
    return np.triu(full) + np.triu(full, 1).T


def approx_truncated_cross(eig: EigenSystem, r: int, kx: CrossKernel | np.ndarray) -> np.ndarray:
    """Project a raw cross-kernel onto the top-r training eigenspace."""
    r = _check_rank(eig, r)
    values = kx.values if isinstance(kx, CrossKernel) else np.ascontiguousarray(kx, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != eig.n:
        raise ValidationError(f"cross-kernel train side must have {eig.n} rows")
    ur = eig.U[:, :r]
    return ur @ (ur.T @ values)


def _check_rank(eig: EigenSystem, r: int) -> int:
    r = int(r)
    if not 1 <= r <= eig.n:
        raise ValidationError(f"truncation rank must be in [1, {eig.n}], got {r}")
    return r


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class SpectralMetrics:
    """The three ratio metrics of a non-negative spectrum."""

    sse: float
    intrinsic_dim: float
    stable_rank: float


@dataclass(frozen=True)
class MetricBlock:
    """All four richness metrics; alpha may be NaN when not computable."""

    alpha: float
    sse: float
    intrinsic_dim: float
    stable_rank: float


@dataclass(frozen=True)
class SpectrumReport:
    """Full and truncated metric blocks plus raw diagnostics."""

    n: int
    min_eigenvalue: float
    full: MetricBlock
    truncated: MetricBlock | None


def _sorted_spectrum(mu) -> np.ndarray:
    arr = np.ascontiguousarray(mu, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValidationError("empty spectrum")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("spectrum contains non-finite values")
    return np.sort(arr)[::-1]


def power_law_alpha(mu, rel_tol: float = ALPHA_FILTER_RTOL) -> float:
    """Negated OLS slope of log mu_j against log j.

    Eigenvalues at or below ``rel_tol * mu_1`` are excluded; at least two
    must survive the filter.
    """
    spec = _sorted_spectrum(mu)
    mu1 = spec[0]
    if mu1 <= 0.0:
        raise ValidationError("power-law fit needs a positive leading eigenvalue")
    keep = spec[spec > rel_tol * mu1]
    if keep.size < 2:
        raise ValidationError("fewer than 2 eigenvalues above the power-law filter")
    j = np.arange(1, keep.size + 1, dtype=np.float64)
    slope = np.polyfit(np.log(j), np.log(keep), 1)[0]
    return float(-slope)


def spectral_metrics(mu) -> SpectralMetrics:
    """SSE, ID and SR of a spectrum; negative entries are clamped to zero."""
    spec = np.maximum(_sorted_spectrum(mu), 0.0)
    mu1 = spec[0]
    if mu1 <= 0.0:
        raise ValidationError("spectral metrics are undefined for an all-zero spectrum")
    # All three metrics are scale-invariant; dividing by mu_1 up front keeps
    # them finite even when the raw eigenvalues under- or overflow squaring.
    ratios = spec / mu1
    total = float(ratios.sum())
    p = ratios / total
    nz = p[p > 0.0]
    sse = float(np.exp(-np.sum(nz * np.log(nz))))
    intrinsic_dim = total
    stable_rank = float(np.sum(ratios**2))
    return SpectralMetrics(sse=sse, intrinsic_dim=intrinsic_dim, stable_rank=stable_rank)


def spectral_rank(mu) -> int:
    """Number of strictly positive eigenvalues after clamping."""
    spec = np.maximum(_sorted_spectrum(mu), 0.0)
    return int(np.count_nonzero(spec))


def truncated_spectrum(mu) -> np.ndarray:
    """Positions 4 .. floor(n/2) of the sorted spectrum (1-based); needs n >= 8."""
    spec = _sorted_spectrum(mu)
    n = spec.size
    if n < 8:
        raise ValidationError(f"truncated metrics need n >= 8, got {n}")
    return spec[3 : n // 2]


def _metric_block(spec: np.ndarray) -> MetricBlock:
    metrics = spectral_metrics(spec)
    try:
        alpha = power_law_alpha(spec)
    except ValidationError as exc:
        log.warning("power-law alpha not computable: %s", exc)
        alpha = math.nan
    return MetricBlock(alpha, metrics.sse, metrics.intrinsic_dim, metrics.stable_rank)


def spectrum_report(mu) -> SpectrumReport:
    """Assemble full and truncated metric blocks for one spectrum.

    The truncated block is None (with a warning) when the window is
    empty (n < 8) or contains no positive eigenvalue.
    """
    spec = _sorted_spectrum(mu)
    full = _metric_block(spec)
    truncated: MetricBlock | None = None
    try:
        truncated = _metric_block(truncated_spectrum(spec))
    except ValidationError as exc:
        log.warning("truncated metric block skipped: %s", exc)
    return SpectrumReport(
        n=int(spec.size),
        min_eigenvalue=float(spec[-1]),
        full=full,
        truncated=truncated,
    )
