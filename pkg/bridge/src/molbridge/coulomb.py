"""Native 3D representations: Coulomb-matrix spectra and bagged interactions.

Both are built from the same nuclear-repulsion picture of a molecule:
self terms ``0.5 * Z**2.4`` and pair terms ``Z_i * Z_j / R_ij`` with
``R_ij`` the interatomic distance in Angstrom as supplied by the input
file.
"""

from __future__ import annotations

import numpy as np

from .elements import SYMBOLS
from .errors import ExportError
from .molfiles import Molecule3D

#: Two atoms closer than this (Angstrom) make the pair term meaningless.
MIN_DISTANCE = 1e-6


def coulomb_matrix(mol: Molecule3D) -> np.ndarray:
    """Symmetric n-by-n matrix of self and pairwise nuclear terms."""
    z = np.asarray(mol.numbers, dtype=np.float64)
    delta = mol.coords[:, None, :] - mol.coords[None, :, :]
    dist = np.sqrt(np.sum(delta**2, axis=-1))
    off = ~np.eye(mol.n_atoms, dtype=bool)
    if mol.n_atoms > 1 and dist[off].min() < MIN_DISTANCE:
        raise ExportError(f"{mol.mol_id}: coincident atoms (distance < {MIN_DISTANCE} Angstrom)")
    matrix = np.where(off, np.outer(z, z) / np.where(off, dist, 1.0), 0.0)
    np.fill_diagonal(matrix, 0.5 * z**2.4)
    return matrix


def cm_eigenvalues(mol: Molecule3D, width: int) -> np.ndarray:
    """Coulomb-matrix eigenvalue spectrum, sorted by descending absolute
    value and zero-padded to ``width`` entries."""
    if mol.n_atoms > width:
        raise ExportError(f"{mol.mol_id}: {mol.n_atoms} atoms exceeds the declared padding width {width}")
    eigenvalues = np.linalg.eigvalsh(coulomb_matrix(mol))
    order = np.argsort(-np.abs(eigenvalues), kind="stable")
    out = np.zeros(width, dtype=np.float64)
    out[: mol.n_atoms] = eigenvalues[order]
    return out


def bob_layout(molecules: tuple[Molecule3D, ...]) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Bag sizes covering a dataset.

    One bag per element (self terms, one slot per atom of that element)
    and one per unordered element pair (one slot per atom pair), each
    sized to the dataset-wide maximum and ordered by bag key.
    """
    sizes: dict[tuple[int, ...], int] = {}
    for mol in molecules:
        counts: dict[int, int] = {}
        for z in mol.numbers:
            counts[z] = counts.get(z, 0) + 1
        local: dict[tuple[int, ...], int] = {}
        for z, c in counts.items():
            local[(z,)] = c
        for z1 in counts:
            for z2 in counts:
                if z1 > z2:
                    continue
                pairs = counts[z1] * (counts[z1] - 1) // 2 if z1 == z2 else counts[z1] * counts[z2]
                if pairs:
                    local[(z1, z2)] = pairs
        for key, size in local.items():
            sizes[key] = max(sizes.get(key, 0), size)
    return tuple(sorted(sizes.items()))


def bob_width(layout: tuple[tuple[tuple[int, ...], int], ...]) -> int:
    return sum(size for _, size in layout)


def describe_bob_layout(layout: tuple[tuple[tuple[int, ...], int], ...]) -> str:
    """Human-readable bag layout for file header comments."""
    parts = []
    for key, size in layout:
        name = "-".join(SYMBOLS.get(z, str(z)) for z in key)
        parts.append(f"{name}:{size}")
    return " ".join(parts)


def bob_vector(mol: Molecule3D, layout: tuple[tuple[tuple[int, ...], int], ...]) -> np.ndarray:
    """Bagged interaction vector: each bag's terms sorted descending,
    zero-padded to the layout size, bags concatenated in layout order."""
    matrix = coulomb_matrix(mol)
    bags: dict[tuple[int, ...], list[float]] = {key: [] for key, _ in layout}
    for i, z in enumerate(mol.numbers):
        key = (z,)
        if key not in bags:
            raise ExportError(f"{mol.mol_id}: element {z} missing from the bag layout")
        bags[key].append(float(matrix[i, i]))
    for i in range(mol.n_atoms):
        for j in range(i + 1, mol.n_atoms):
            key = tuple(sorted((mol.numbers[i], mol.numbers[j])))
            if key not in bags:
                raise ExportError(f"{mol.mol_id}: element pair {key} missing from the bag layout")
            bags[key].append(float(matrix[i, j]))
    out = np.zeros(bob_width(layout), dtype=np.float64)
    offset = 0
    for key, size in layout:
        values = sorted(bags[key], reverse=True)
        if len(values) > size:
            raise ExportError(f"{mol.mol_id}: bag {key} overflows the declared layout size {size}")
        out[offset : offset + len(values)] = values
        offset += size
    return out
