"""Molecular kernel functions and Gram-matrix construction.

Three input modalities are supported: binary fingerprints (a catalog of
14 similarity families), dense feature vectors (Gaussian, Laplacian and
linear kernels), and per-atom local environments (species-matched sums
of Gaussian or Laplacian terms).

Gram matrices are assembled from the upper triangle and mirrored, so the
result is exactly symmetric even for the two catalog families whose
printed forms are not symmetric in their arguments (Rogers-Tanimoto and
Sokal-Sneath; entry (i, j) with i <= j is k(M_i, M_j)).  Setting
``classical=True`` on the config switches Otsuka, Sogenfrei,
Rogers-Tanimoto and Sokal-Sneath to their textbook definitions, which
are symmetric.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.spatial.distance import cdist

from .dataset_io import FeatureDataset, FingerprintDataset, LocalEnvDataset, Molecule
from .errors import ParseError, ValidationError
from .parallel import parallel_map

log = logging.getLogger(__name__)

FINGERPRINT_FAMILIES = (
    "tanimoto",
    "dice",
    "otsuka",
    "sogenfrei",
    "braun-blanquet",
    "faith",
    "forbes",
    "inner-product",
    "intersection",
    "min-max",
    "rand",
    "rogers-tanimoto",
    "russel-rao",
    "sokal-sneath",
)
ISO_FAMILIES = ("gaussian", "laplacian", "linear")
LOCAL_FAMILIES = ("gaussian", "laplacian")

_GRAM_MAGIC = b"KSGM"


@dataclass(frozen=True)
class KernelConfig:
    """Kernel family plus hyperparameters.

    ``sigma_f`` is the fingerprint amplitude: its square multiplies every
    fingerprint-family kernel value.  ``sigma_l`` is the length scale of
    the Gaussian/Laplacian kernels.  ``local=True`` selects the
    species-matched local-environment kernel (Gaussian or Laplacian base
    only).
    """

    family: str
    sigma_f: float = 1.0
    sigma_l: float = 100.0
    local: bool = False
    classical: bool = False

    def __post_init__(self) -> None:
        if self.local:
            if self.family not in LOCAL_FAMILIES:
                raise ValidationError(f"local kernels require a family in {LOCAL_FAMILIES}, got {self.family!r}")
        elif self.family not in FINGERPRINT_FAMILIES + ISO_FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if not (self.sigma_f > 0 and np.isfinite(self.sigma_f)):
            raise ValidationError("sigma_f must be a positive finite real")
        if not (self.sigma_l > 0 and np.isfinite(self.sigma_l)):
            raise ValidationError("sigma_l must be a positive finite real")

    @property
    def is_fingerprint(self) -> bool:
        return not self.local and self.family in FINGERPRINT_FAMILIES

    def digest(self) -> bytes:
        """Stable 32-byte identity of this configuration, used by the Gram cache."""
        text = (
            f"family={self.family};sigma_f={self.sigma_f!r};sigma_l={self.sigma_l!r};"
            f"local={int(self.local)};classical={int(self.classical)}"
        )
        return hashlib.sha256(text.encode("ascii")).digest()


# ---------------------------------------------------------------------------
# Fingerprint families
#
# All 14 families are elementwise functions of the inner product a, the
# bit counts s1 and s2, the dimension d and the common-zero count
# d0 = d - s1 - s2 + a, so one formula table serves both the scalar and
# the vectorized path (which guarantees the two agree bitwise).


def _fp_formula(family: str, a, s1, s2, d: float, classical: bool):
    d0 = d - s1 - s2 + a
    with np.errstate(divide="ignore", invalid="ignore"):
        if family == "tanimoto":
            return _safe_div(a, s1 + s2 - a)
        if family == "dice":
            return _safe_div(2.0 * a, s1 + s2)
        if family == "otsuka":
            den = np.sqrt(s1 * s2) if classical else np.sqrt(s1 + s2)
            return _safe_div(a, den)
        if family == "sogenfrei":
            den = s1 * s2 if classical else s1 + s2
            return _safe_div(a * a, den)
        if family == "braun-blanquet":
            return _safe_div(a, np.maximum(s1, s2))
        if family == "faith":
            return (2.0 * a + d0) / (2.0 * d)
        if family == "forbes":
            return _safe_div(d * a, s1 + s2)
        if family == "inner-product":
            return a
        if family == "intersection":
            return a + d0
        if family == "min-max":
            diff = s1 + s2 - 2.0 * a  # |x1 - x2|_1 for binary vectors
            return _safe_div(s1 + s2 - diff, s1 + s2 + diff)
        if family == "rand":
            return (a + d) / d
        if family == "rogers-tanimoto":
            if classical:
                return (a + d0) / (2.0 * s1 + 2.0 * s2 - 3.0 * a + d0)
            _require_nonzero(s1, family)
            return a + d0 / (2.0 * s1) + 2.0 * s2 - 3.0 * a + d0
        if family == "russel-rao":
            return a / d
        if family == "sokal-sneath":
            if classical:
                return _safe_div(a, 2.0 * s1 + 2.0 * s2 - 3.0 * a)
            _require_nonzero(s1, family)
            return a / (2.0 * s1) + 2.0 * s2 - 3.0 * a
    raise ValidationError(f"unknown fingerprint family {family!r}")


def _safe_div(num, den):
    # Zero denominators occur only for empty fingerprints; by convention
    # the similarity is 0 there.
    out = np.where(np.asarray(den) == 0.0, 0.0, num / np.where(np.asarray(den) == 0.0, 1.0, den))
    return out


def _require_nonzero(s1, family: str) -> None:
    if np.any(np.asarray(s1) == 0.0):
        raise ValidationError(f"zero denominator in {family!r} kernel: fingerprint with no set bits")


def _as_binary(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError("fingerprint vectors must be 1-dimensional")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValidationError("fingerprint vectors must be binary")
    return arr


def fingerprint_kernel(x1, x2, config: KernelConfig) -> float:
    """Evaluate one fingerprint-family kernel on a pair of binary vectors."""
    if not config.is_fingerprint:
        raise ValidationError(f"{config.family!r} is not a fingerprint family")
    v1, v2 = _as_binary(x1), _as_binary(x2)
    if v1.shape != v2.shape:
        raise ValidationError(f"fingerprint lengths differ: {v1.shape[0]} vs {v2.shape[0]}")
    a = float(v1 @ v2)
    s1, s2 = float(v1.sum()), float(v2.sum())
    value = _fp_formula(config.family, a, s1, s2, float(v1.shape[0]), config.classical)
    return float(config.sigma_f**2 * value)


def iso_kernel(v1, v2, config: KernelConfig) -> float:
    """Evaluate a Gaussian, Laplacian or linear kernel on a pair of real vectors."""
    if config.local or config.family not in ISO_FAMILIES:
        raise ValidationError(f"{config.family!r} is not an isotropic feature-space family")
    a1 = np.asarray(v1, dtype=np.float64)
    a2 = np.asarray(v2, dtype=np.float64)
    if a1.shape != a2.shape or a1.ndim != 1:
        raise ValidationError("feature vectors must be 1-dimensional and of equal length")
    if config.family == "gaussian":
        return float(np.exp(-float(np.sum((a1 - a2) ** 2)) / (2.0 * config.sigma_l**2)))
    if config.family == "laplacian":
        return float(np.exp(-float(np.sum(np.abs(a1 - a2))) / config.sigma_l))
    return float(a1 @ a2)


def local_kernel(mol1: Molecule, mol2: Molecule, config: KernelConfig) -> float:
    """Sum of base-kernel terms over pairs of same-species atomic environments."""
    if not config.local:
        raise ValidationError("local_kernel requires a config with local=True")
    if mol1.descriptors.shape[1] != mol2.descriptors.shape[1]:
        raise ValidationError("molecules disagree on local descriptor width")
    return _local_pair(_species_blocks(mol1), _species_blocks(mol2), config)


def _species_blocks(mol: Molecule) -> dict[int, np.ndarray]:
    blocks: dict[int, np.ndarray] = {}
    for z in sorted(set(int(z) for z in mol.zs)):
        blocks[z] = mol.descriptors[mol.zs == z]
    return blocks


def _local_pair(blocks1: Mapping[int, np.ndarray], blocks2: Mapping[int, np.ndarray], config: KernelConfig) -> float:
    total = 0.0
    for z, b1 in blocks1.items():
        b2 = blocks2.get(z)
        if b2 is None:
            continue
        if config.family == "gaussian":
            dist = cdist(b1, b2, "sqeuclidean")
            total += float(np.exp(-dist / (2.0 * config.sigma_l**2)).sum())
        else:
            dist = cdist(b1, b2, "cityblock")
            total += float(np.exp(-dist / config.sigma_l).sum())
    return total


# ---------------------------------------------------------------------------
# Gram and cross-kernel matrices


@dataclass(frozen=True)
class KernelMatrix:
    """A symmetric Gram matrix over one dataset, with its provenance config."""

    values: np.ndarray  # (n, n) float64
    config: KernelConfig
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValidationError("Gram matrix must be square")
        if len(self.ids) != values.shape[0]:
            raise ValidationError("Gram matrix size does not match number of ids")
        if not np.all(np.isfinite(values)):
            raise ValidationError("Gram matrix contains non-finite entries")
        scale = float(np.max(np.abs(values))) if values.size else 0.0
        asym = float(np.max(np.abs(values - values.T))) if values.size else 0.0
        if asym > 1e-12 * max(scale, 1.0):
            raise ValidationError(f"Gram matrix is not symmetric (max asymmetry {asym:.3e})")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CrossKernel:
    """Kernel values between a training set (rows) and a test set (columns)."""

    values: np.ndarray  # (n_train, n_test) float64
    config: KernelConfig
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("cross-kernel matrix must be 2-dimensional")
        if values.shape != (len(self.train_ids), len(self.test_ids)):
            raise ValidationError("cross-kernel shape does not match id lists")
        if not np.all(np.isfinite(values)):
            raise ValidationError("cross-kernel contains non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "train_ids", tuple(self.train_ids))
        object.__setattr__(self, "test_ids", tuple(self.test_ids))

    @property
    def n_train(self) -> int:
        return self.values.shape[0]

    @property
    def n_test(self) -> int:
        return self.values.shape[1]


Dataset = FingerprintDataset | FeatureDataset | LocalEnvDataset


def _check_modality(dataset: Dataset, config: KernelConfig) -> None:
    if config.local:
        if not isinstance(dataset, LocalEnvDataset):
            raise ValidationError("local kernels require a local-environment dataset")
    elif config.is_fingerprint:
        if not isinstance(dataset, FingerprintDataset):
            raise ValidationError(f"family {config.family!r} requires a fingerprint dataset")
    else:
        if not isinstance(dataset, FeatureDataset):
            raise ValidationError(f"family {config.family!r} requires a feature dataset")


def _mirror_upper(full: np.ndarray) -> np.ndarray:
    # Keep the upper triangle, mirror it onto the lower one; the result is
    # bit-identical across the diagonal by construction.
    return np.triu(full) + np.triu(full, 1).T


def _fingerprint_block(bits1: np.ndarray, bits2: np.ndarray, config: KernelConfig) -> np.ndarray:
    x1 = bits1.astype(np.float64)
    x2 = bits2.astype(np.float64)
    a = x1 @ x2.T
    s1 = x1.sum(axis=1)[:, None]
    s2 = x2.sum(axis=1)[None, :]
    value = _fp_formula(config.family, a, s1, s2, float(x1.shape[1]), config.classical)
    return config.sigma_f**2 * np.asarray(value, dtype=np.float64)


def _iso_block(v1: np.ndarray, v2: np.ndarray, config: KernelConfig) -> np.ndarray:
    if config.family == "gaussian":
        return np.exp(-cdist(v1, v2, "sqeuclidean") / (2.0 * config.sigma_l**2))
    if config.family == "laplacian":
        return np.exp(-cdist(v1, v2, "cityblock") / config.sigma_l)
    return v1 @ v2.T


def _local_matrix(ds1: LocalEnvDataset, ds2: LocalEnvDataset, config: KernelConfig, jobs: int | None, symmetric: bool) -> np.ndarray:
    if ds1.d_loc != ds2.d_loc:
        raise ValidationError("datasets disagree on local descriptor width")
    blocks1 = [_species_blocks(m) for m in ds1.molecules]
    blocks2 = blocks1 if symmetric else [_species_blocks(m) for m in ds2.molecules]
    n1, n2 = len(blocks1), len(blocks2)
    out = np.zeros((n1, n2), dtype=np.float64)

    def fill_row(i: int) -> np.ndarray:
        start = i if symmetric else 0
        row = np.zeros(n2 - start)
        for j in range(start, n2):
            row[j - start] = _local_pair(blocks1[i], blocks2[j], config)
        return row

    rows = parallel_map(fill_row, range(n1), jobs)
    for i, row in enumerate(rows):
        start = i if symmetric else 0
        out[i, start:] = row
    if symmetric:
        out = _mirror_upper(out)
    return out


def gram(dataset: Dataset, config: KernelConfig, jobs: int | None = 1) -> KernelMatrix:
    """Build the full symmetric Gram matrix of a dataset under ``config``."""
    _check_modality(dataset, config)
    if isinstance(dataset, LocalEnvDataset):
        values = _local_matrix(dataset, dataset, config, jobs, symmetric=True)
    elif isinstance(dataset, FingerprintDataset):
        values = _mirror_upper(_fingerprint_block(dataset.bits, dataset.bits, config))
    else:
        values = _mirror_upper(_iso_block(dataset.values, dataset.values, config))
    return KernelMatrix(values, config, dataset.ids)


def cross(train: Dataset, test: Dataset, config: KernelConfig, jobs: int | None = 1) -> CrossKernel:
    """Kernel values k(train_i, test_j) between two datasets of the same modality."""
    _check_modality(train, config)
    _check_modality(test, config)
    if isinstance(train, LocalEnvDataset):
        values = _local_matrix(train, test, config, jobs, symmetric=False)
    elif isinstance(train, FingerprintDataset):
        if train.d != test.d:
            raise ValidationError(f"fingerprint widths differ: {train.d} vs {test.d}")
        values = _fingerprint_block(train.bits, test.bits, config)
    else:
        if train.d != test.d:
            raise ValidationError(f"feature widths differ: {train.d} vs {test.d}")
        values = _iso_block(train.values, test.values, config)
    return CrossKernel(values, config, train.ids, test.ids)


# ---------------------------------------------------------------------------
# Gram cache file
#
# Layout: 4-byte magic "KSGM", little-endian uint32 n, 32-byte config
# digest, then the n(n+1)/2 upper-triangle entries (row-major, float64
# little-endian).


def write_gram_cache(path: str | Path, matrix: KernelMatrix) -> None:
    n = matrix.n
    upper = matrix.values[np.triu_indices(n)]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", _GRAM_MAGIC, n))
        fh.write(matrix.config.digest())
        fh.write(np.ascontiguousarray(upper, dtype="<f8").tobytes())


def read_gram_cache(path: str | Path, config: KernelConfig | None = None) -> tuple[np.ndarray, bytes]:
    """Read a cached Gram matrix; verifies the config digest when one is given."""
    path = Path(path)
    blob = path.read_bytes()
    header = struct.calcsize("<4sI")
    if len(blob) < header + 32:
        raise ParseError(path, None, "truncated Gram cache header")
    magic, n = struct.unpack_from("<4sI", blob)
    if magic != _GRAM_MAGIC:
        raise ParseError(path, None, f"bad magic {magic!r}")
    digest = blob[header : header + 32]
    expected = header + 32 + 8 * (n * (n + 1) // 2)
    if len(blob) != expected:
        raise ParseError(path, None, f"cache holds {len(blob)} bytes, expected {expected} for n={n}")
    if config is not None and config.digest() != digest:
        raise ValidationError("Gram cache was written with a different kernel configuration")
    upper = np.frombuffer(blob, dtype="<f8", offset=header + 32).astype(np.float64)
    values = np.zeros((n, n), dtype=np.float64)
    values[np.triu_indices(n)] = upper
    values = values + np.triu(values, 1).T
    return values, digest
