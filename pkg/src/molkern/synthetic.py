"""Deterministic synthetic datasets for tests, benchmarks and demos.

Real molecular descriptor sets are not reproducible in a hermetic
environment, so the desk-scale experiments run on a seeded stand-in: a
smooth low-dimensional feature manifold with a family of energy-like
targets that differ only by small smooth shifts, plus a handful of
harder nonlinear properties.
"""

from __future__ import annotations

import numpy as np

from .dataset_io import FeatureDataset, FingerprintDataset, TargetTable
from .kernels import KernelConfig, KernelMatrix


def _ids(prefix: str, n: int) -> tuple[str, ...]:
    width = max(6, len(str(n)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def random_spd_kernel(n: int, seed: int, jitter: float = 1e-3) -> KernelMatrix:
    """A well-conditioned random SPD Gram matrix (linear-kernel provenance tag)."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    values = a @ a.T / n + jitter * np.eye(n)
    values = np.triu(values) + np.triu(values, 1).T
    return KernelMatrix(values, KernelConfig("linear"), _ids("s", n))


def power_law_spectrum(n: int, alpha: float) -> np.ndarray:
    """Spectrum mu_j = j^-alpha, j = 1..n."""
    j = np.arange(1, n + 1, dtype=np.float64)
    return j**-alpha


def random_fingerprints(n: int, d: int, seed: int, density: float = 0.25) -> FingerprintDataset:
    rng = np.random.default_rng(seed)
    bits = (rng.random((n, d)) < density).astype(np.uint8)
    # Guarantee no empty fingerprint; several families reject or zero them.
    empty = bits.sum(axis=1) == 0
    bits[empty, 0] = 1
    return FingerprintDataset(_ids("fp", n), bits)


def low_rank_linear_fixture(n: int, rank: int, d: int, seed: int) -> tuple[FeatureDataset, TargetTable]:
    """Features of exact rank ``rank`` with a noiseless target in their column space.

    The left factor is drawn with i.i.d. normal entries, so the nonzero
    eigenvalues of the linear-kernel Gram matrix share the same scale and
    the target excites all of them.
    """
    rng = np.random.default_rng(seed)
    left = rng.standard_normal((n, rank))
    right = rng.standard_normal((rank, d)) / np.sqrt(d)
    x = left @ right
    w = rng.standard_normal(d)
    y = x @ w
    ids = _ids("lr", n)
    return FeatureDataset(ids, x), TargetTable(ids, ("y",), y[:, None])


#: Properties produced by the desk-scale molecular fixture; the first four
#: are the near-identical energy family.
DESK_ENERGY_PROPERTIES = ("u0", "u298", "h298", "g298")
DESK_PROPERTIES = DESK_ENERGY_PROPERTIES + ("gap", "cv", "zpve")


def desk_fixture(
    n: int = 2500,
    seed: int = 7,
    d: int = 32,
    latent: int = 6,
    feature_scale: float = 25.0,
    noise: float = 0.01,
) -> tuple[FeatureDataset, TargetTable]:
    """Smooth manifold features plus seven thermochemistry-style targets.

    Features are a bounded nonlinear embedding of a ``latent``-dimensional
    Gaussian variable, scaled so pairwise distances suit a Gaussian kernel
    with length scale 100.  The four energy targets share one backbone
    function of the latents and differ by small smooth thermal shifts;
    ``gap``, ``cv`` and ``zpve`` are independent harder nonlinearities.
    ``noise`` is the i.i.d. observation noise level relative to each
    target's signal spread.
    """
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((n, latent))

    w1 = rng.standard_normal((latent, d)) / np.sqrt(latent)
    b1 = rng.uniform(-1.0, 1.0, d)
    x = feature_scale * np.tanh(t @ w1 + b1)

    def unit(v: np.ndarray) -> np.ndarray:
        return (v - v.mean()) / v.std()

    a0 = rng.standard_normal(latent)
    a1 = rng.standard_normal(latent)
    a2 = rng.standard_normal(latent)
    backbone = unit(
        t @ a0
        + 0.7 * np.tanh(t @ a1)
        + 0.4 * np.sin(t @ a2)
        + 0.25 * (t[:, 0] * t[:, 1])
    )
    shift1 = unit(np.tanh(t @ rng.standard_normal(latent)))
    shift2 = unit(np.sin(0.7 * t @ rng.standard_normal(latent)))
    shift3 = unit(t @ rng.standard_normal(latent))

    def observe(signal: np.ndarray) -> np.ndarray:
        return signal + noise * signal.std() * rng.standard_normal(n)

    u0 = observe(backbone)
    u298 = observe(backbone + 0.05 * shift1)
    h298 = observe(backbone + 0.05 * shift1 + 0.03 * shift2)
    g298 = observe(backbone - 0.06 * shift3)

    gap = observe(unit(np.tanh(1.5 * t @ rng.standard_normal(latent)) + 0.5 * np.cos(t @ rng.standard_normal(latent))))
    cv = observe(unit(np.sum(np.abs(t), axis=1) + 0.5 * t @ rng.standard_normal(latent)))
    zpve = observe(unit(np.sum(t**2, axis=1) + t @ rng.standard_normal(latent)))

    columns = np.column_stack([u0, u298, h298, g298, gap, cv, zpve])
    ids = _ids("qm", n)
    return FeatureDataset(ids, x), TargetTable(ids, DESK_PROPERTIES, columns)
