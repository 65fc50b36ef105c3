"""Readers for raw molecule files: multi-block XYZ and SMILES line lists."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .elements import atomic_number
from .errors import MoleculeParseError


@dataclass(frozen=True)
class Molecule3D:
    """One molecule with explicit 3D coordinates (Angstrom)."""

    mol_id: str
    numbers: tuple[int, ...]
    coords: np.ndarray  # (n_atoms, 3) float64

    def __post_init__(self) -> None:
        coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape != (len(self.numbers), 3):
            raise MoleculeParseError("<memory>", None, f"{self.mol_id}: coordinate shape mismatch")
        if not self.numbers:
            raise MoleculeParseError("<memory>", None, f"{self.mol_id}: molecule has no atoms")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "numbers", tuple(int(z) for z in self.numbers))

    @property
    def n_atoms(self) -> int:
        return len(self.numbers)


@dataclass(frozen=True)
class SmilesRecord:
    """One SMILES string with its source line for error reporting."""

    mol_id: str
    smiles: str
    line: int


def _index_id(i: int) -> str:
    return f"m{i:06d}"


def read_xyz(path: str | Path) -> tuple[Molecule3D, ...]:
    """Parse a (possibly concatenated) XYZ file.

    Each block is an atom-count line, a comment line, then one
    ``symbol x y z`` line per atom; extra trailing columns are ignored.
    Molecules are assigned sequential ids ``m000001``, ``m000002``, ...
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    molecules: list[Molecule3D] = []
    pos = 0
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        try:
            n_atoms = int(lines[pos].strip())
        except ValueError:
            raise MoleculeParseError(path, pos + 1, f"expected an atom count, got {lines[pos].strip()!r}") from None
        if n_atoms < 1:
            raise MoleculeParseError(path, pos + 1, f"atom count must be >= 1, got {n_atoms}")
        if pos + 2 + n_atoms > len(lines):
            raise MoleculeParseError(path, pos + 1, f"truncated block: {n_atoms} atoms declared")
        numbers: list[int] = []
        rows: list[tuple[float, float, float]] = []
        for k in range(n_atoms):
            lineno = pos + 3 + k
            fields = lines[lineno - 1].split()
            if len(fields) < 4:
                raise MoleculeParseError(path, lineno, "atom line needs 'symbol x y z'")
            z = atomic_number(fields[0])
            if z is None:
                raise MoleculeParseError(path, lineno, f"unknown element symbol {fields[0]!r}")
            try:
                xyz = tuple(float(v) for v in fields[1:4])
            except ValueError:
                raise MoleculeParseError(path, lineno, "coordinates must be numeric") from None
            if not all(np.isfinite(xyz)):
                raise MoleculeParseError(path, lineno, "coordinates must be finite")
            numbers.append(z)
            rows.append(xyz)
        molecules.append(
            Molecule3D(_index_id(len(molecules) + 1), tuple(numbers), np.asarray(rows, dtype=np.float64))
        )
        pos += 2 + n_atoms
    if not molecules:
        raise MoleculeParseError(path, None, "no molecules found")
    return tuple(molecules)


def read_smiles(path: str | Path) -> tuple[SmilesRecord, ...]:
    """Parse a SMILES list: one ``<smiles> [<id>]`` per line.

    Blank lines and lines starting with ``#`` are skipped (a valid
    SMILES string never begins with ``#``).  Missing ids are assigned
    sequentially as ``m000001``, ...; explicit ids must be unique.
    """
    path = Path(path)
    records: list[SmilesRecord] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) > 2:
            raise MoleculeParseError(path, lineno, "expected '<smiles> [<id>]'")
        mol_id = fields[1] if len(fields) == 2 else _index_id(len(records) + 1)
        if mol_id in seen:
            raise MoleculeParseError(path, lineno, f"duplicate id {mol_id!r}")
        seen.add(mol_id)
        records.append(SmilesRecord(mol_id, fields[0], lineno))
    if not records:
        raise MoleculeParseError(path, None, "no molecules found")
    return tuple(records)
