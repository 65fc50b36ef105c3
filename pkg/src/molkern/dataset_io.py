"""Readers and writers for the on-disk dataset formats.

Four line-oriented text formats cover every representation the toolkit
consumes: bit-string fingerprint files, dense feature CSVs, JSON-lines
local-environment files, and target CSVs keyed by molecule id.  Readers
validate eagerly and report the offending line; the returned dataset
objects are immutable.  Writers emit a canonical form, so
``write(read(write(ds)))`` is a fixed point byte for byte.

Row order is always preserved from the file; nothing here sorts ids.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

_HEADER_RE = re.compile(r"^#\s*d=(\d+)\s*$")


def _check_ids(ids: Sequence[str], path: object = "<memory>") -> None:
    seen: set[str] = set()
    for i, mol_id in enumerate(ids):
        if not mol_id:
            raise ParseError(path, None, f"empty id at row {i}")
        if mol_id in seen:
            raise ParseError(path, None, f"duplicate id {mol_id!r}")
        seen.add(mol_id)


def _writable_id(mol_id: str) -> str:
    if re.search(r"[\s,]", mol_id):
        raise ValidationError(f"id {mol_id!r} contains whitespace or a comma")
    return mol_id


def _format_float(x: float) -> str:
    # repr of a Python float is the shortest string that round-trips.
    return repr(float(x))


def _index_of(ids: Sequence[str], wanted: Sequence[str], what: str) -> np.ndarray:
    lookup = {mol_id: i for i, mol_id in enumerate(ids)}
    try:
        return np.asarray([lookup[mol_id] for mol_id in wanted], dtype=np.intp)
    except KeyError as exc:
        raise ValidationError(f"{what}: unknown id {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# Fingerprints


@dataclass(frozen=True)
class FingerprintDataset:
    """Binary fingerprint matrix with one row per molecule."""

    ids: tuple[str, ...]
    bits: np.ndarray  # (n, d) uint8, entries in {0, 1}

    def __post_init__(self) -> None:
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.ndim != 2:
            raise ValidationError("fingerprint matrix must be 2-dimensional")
        if len(self.ids) != bits.shape[0]:
            raise ValidationError("number of ids does not match number of rows")
        if bits.size and bits.max() > 1:
            raise ValidationError("fingerprint entries must be 0 or 1")
        _check_ids(self.ids)
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def d(self) -> int:
        return self.bits.shape[1]

    def subset(self, ids: Sequence[str]) -> "FingerprintDataset":
        idx = _index_of(self.ids, ids, "fingerprint subset")
        return FingerprintDataset(tuple(ids), self.bits[idx])


def read_fingerprints(path: str | Path) -> FingerprintDataset:
    """Parse a fingerprint text file.

    The file must declare the bit length in a ``# d=<int>`` header before
    any data row; remaining ``#`` lines are comments.  Each data row is
    ``<id> <bitstring>`` with the bit string exactly ``d`` characters of
    0/1.
    """
    path = Path(path)
    d: int | None = None
    ids: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER_RE.match(line)
                if m:
                    if d is not None:
                        raise ParseError(path, lineno, "duplicate d= header")
                    d = int(m.group(1))
                    if d < 1:
                        raise ParseError(path, lineno, "d must be >= 1")
                continue
            if d is None:
                raise ParseError(path, lineno, "data row before mandatory '# d=<int>' header")
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected '<id> <bitstring>', got {len(parts)} fields")
            mol_id, bitstring = parts
            if mol_id in seen:
                raise ParseError(path, lineno, f"duplicate id {mol_id!r}")
            seen.add(mol_id)
            if len(bitstring) != d:
                raise ParseError(path, lineno, f"bit string has length {len(bitstring)}, expected d={d}")
            if bitstring.strip("01"):
                raise ParseError(path, lineno, "bit string contains characters other than 0/1")
            ids.append(mol_id)
            rows.append(np.frombuffer(bitstring.encode("ascii"), dtype=np.uint8) - ord("0"))
    if d is None:
        raise ParseError(path, None, "missing mandatory '# d=<int>' header")
    if not rows:
        raise ParseError(path, None, "file contains no fingerprint rows")
    return FingerprintDataset(tuple(ids), np.vstack(rows))


def write_fingerprints(path: str | Path, dataset: FingerprintDataset, comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write(f"# d={dataset.d}\n")
        for mol_id, row in zip(dataset.ids, dataset.bits):
            bitstring = "".join("1" if b else "0" for b in row)
            fh.write(f"{_writable_id(mol_id)} {bitstring}\n")


# ---------------------------------------------------------------------------
# Dense feature vectors


@dataclass(frozen=True)
class FeatureDataset:
    """Real-valued feature matrix with one row per molecule."""

    ids: tuple[str, ...]
    values: np.ndarray  # (n, d) float64

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError("feature matrix must be 2-dimensional")
        if len(self.ids) != values.shape[0]:
            raise ValidationError("number of ids does not match number of rows")
        if not np.all(np.isfinite(values)):
            raise ValidationError("feature matrix contains non-finite values")
        _check_ids(self.ids)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def subset(self, ids: Sequence[str]) -> "FeatureDataset":
        idx = _index_of(self.ids, ids, "feature subset")
        return FeatureDataset(tuple(ids), self.values[idx])


def read_features(path: str | Path) -> FeatureDataset:
    """Parse a feature CSV with header ``id,f0,...,f{d-1}``.

    Leading ``#`` lines are treated as comments.  Every value must be a
    finite float and every row must match the header width.
    """
    path = Path(path)
    header: list[str] | None = None
    ids: list[str] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if header is None:
                if fields[0] != "id" or len(fields) < 2:
                    raise ParseError(path, lineno, "header must be 'id,<f0>,...'")
                header = fields
                continue
            if len(fields) != len(header):
                raise ParseError(path, lineno, f"row has {len(fields)} fields, header has {len(header)}")
            ids.append(fields[0])
            try:
                row = [float(v) for v in fields[1:]]
            except ValueError:
                raise ParseError(path, lineno, "row contains a non-numeric value") from None
            if not all(np.isfinite(row)):
                raise ParseError(path, lineno, "row contains a non-finite value")
            rows.append(row)
    if header is None:
        raise ParseError(path, None, "missing header row")
    if not rows:
        raise ParseError(path, None, "file contains no feature rows")
    try:
        return FeatureDataset(tuple(ids), np.asarray(rows, dtype=np.float64))
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


def write_features(path: str | Path, dataset: FeatureDataset, comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write("id," + ",".join(f"f{j}" for j in range(dataset.d)) + "\n")
        for mol_id, row in zip(dataset.ids, dataset.values):
            fh.write(_writable_id(mol_id) + "," + ",".join(_format_float(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Local atomic environments


@dataclass(frozen=True)
class Molecule:
    """Atomic numbers plus one local descriptor vector per atom."""

    zs: np.ndarray  # (n_atoms,) int64
    descriptors: np.ndarray  # (n_atoms, d_loc) float64

    def __post_init__(self) -> None:
        zs = np.ascontiguousarray(self.zs, dtype=np.int64)
        desc = np.ascontiguousarray(self.descriptors, dtype=np.float64)
        if zs.ndim != 1 or desc.ndim != 2 or zs.shape[0] != desc.shape[0]:
            raise ValidationError("molecule atoms and descriptors are inconsistent")
        if zs.shape[0] == 0:
            raise ValidationError("molecule has no atoms")
        if zs.min() < 1:
            raise ValidationError("atomic numbers must be >= 1")
        if not np.all(np.isfinite(desc)):
            raise ValidationError("descriptors contain non-finite values")
        zs.flags.writeable = False
        desc.flags.writeable = False
        object.__setattr__(self, "zs", zs)
        object.__setattr__(self, "descriptors", desc)

    @property
    def n_atoms(self) -> int:
        return self.zs.shape[0]


@dataclass(frozen=True)
class LocalEnvDataset:
    """Per-molecule atomic environments with a common descriptor width."""

    ids: tuple[str, ...]
    molecules: tuple[Molecule, ...]
    d_loc: int = field(init=False)

    def __post_init__(self) -> None:
        if len(self.ids) != len(self.molecules):
            raise ValidationError("number of ids does not match number of molecules")
        if not self.molecules:
            raise ValidationError("dataset contains no molecules")
        _check_ids(self.ids)
        widths = {mol.descriptors.shape[1] for mol in self.molecules}
        if len(widths) != 1:
            raise ValidationError(f"inconsistent descriptor widths: {sorted(widths)}")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "molecules", tuple(self.molecules))
        object.__setattr__(self, "d_loc", widths.pop())

    @property
    def n(self) -> int:
        return len(self.ids)

    def subset(self, ids: Sequence[str]) -> "LocalEnvDataset":
        idx = _index_of(self.ids, ids, "local-env subset")
        return LocalEnvDataset(tuple(ids), tuple(self.molecules[i] for i in idx))


def read_local_envs(path: str | Path) -> LocalEnvDataset:
    """Parse a JSON-lines file of ``{"id": ..., "atoms": [{"Z": ..., "v": [...]}]}``."""
    path = Path(path)
    ids: list[str] = []
    molecules: list[Molecule] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict) or "id" not in obj or "atoms" not in obj:
                raise ParseError(path, lineno, "object must have 'id' and 'atoms' keys")
            mol_id = str(obj["id"])
            if mol_id in seen:
                raise ParseError(path, lineno, f"duplicate id {mol_id!r}")
            seen.add(mol_id)
            atoms = obj["atoms"]
            if not isinstance(atoms, list) or not atoms:
                raise ParseError(path, lineno, "'atoms' must be a non-empty list")
            zs: list[int] = []
            vecs: list[list[float]] = []
            for atom in atoms:
                if not isinstance(atom, dict) or "Z" not in atom or "v" not in atom:
                    raise ParseError(path, lineno, "each atom must have 'Z' and 'v'")
                zs.append(int(atom["Z"]))
                vecs.append([float(x) for x in atom["v"]])
            widths = {len(v) for v in vecs}
            if len(widths) != 1:
                raise ParseError(path, lineno, "atoms disagree on descriptor width")
            try:
                molecules.append(Molecule(np.asarray(zs), np.asarray(vecs, dtype=np.float64)))
            except ValidationError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            ids.append(mol_id)
    if not molecules:
        raise ParseError(path, None, "file contains no molecules")
    try:
        return LocalEnvDataset(tuple(ids), tuple(molecules))
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


def write_local_envs(path: str | Path, dataset: LocalEnvDataset, comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        for mol_id, mol in zip(dataset.ids, dataset.molecules):
            atoms = [{"Z": int(z), "v": [float(x) for x in vec]} for z, vec in zip(mol.zs, mol.descriptors)]
            fh.write(json.dumps({"id": mol_id, "atoms": atoms}, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# Targets


@dataclass(frozen=True)
class TargetTable:
    """Per-molecule regression targets, one column per property."""

    ids: tuple[str, ...]
    properties: tuple[str, ...]
    values: np.ndarray  # (n, n_properties) float64

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape != (len(self.ids), len(self.properties)):
            raise ValidationError("target matrix shape does not match ids/properties")
        if not self.properties:
            raise ValidationError("target table declares no properties")
        if len(set(self.properties)) != len(self.properties):
            raise ValidationError("duplicate property names")
        if not np.all(np.isfinite(values)):
            raise ValidationError("target table contains non-finite values")
        _check_ids(self.ids)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "properties", tuple(self.properties))

    @property
    def n(self) -> int:
        return len(self.ids)

    def column(self, prop: str, ids: Sequence[str] | None = None) -> np.ndarray:
        """Return the target values for one property, optionally for a subset of ids in order."""
        if prop not in self.properties:
            raise ValidationError(f"unknown property {prop!r}; table has {list(self.properties)}")
        col = self.values[:, self.properties.index(prop)]
        if ids is None:
            return col.copy()
        return col[_index_of(self.ids, ids, "target lookup")]


def read_targets(path: str | Path) -> TargetTable:
    """Parse a target CSV with header ``id,<property>,...``."""
    path = Path(path)
    header: list[str] | None = None
    ids: list[str] = []
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if header is None:
                if fields[0] != "id" or len(fields) < 2:
                    raise ParseError(path, lineno, "header must be 'id,<property>,...'")
                header = fields
                continue
            if len(fields) != len(header):
                raise ParseError(path, lineno, f"row has {len(fields)} fields, header has {len(header)}")
            ids.append(fields[0])
            try:
                row = [float(v) for v in fields[1:]]
            except ValueError:
                raise ParseError(path, lineno, "row contains a non-numeric value") from None
            if not all(np.isfinite(row)):
                raise ParseError(path, lineno, "row contains a non-finite value")
            rows.append(row)
    if header is None:
        raise ParseError(path, None, "missing header row")
    if not rows:
        raise ParseError(path, None, "file contains no target rows")
    try:
        return TargetTable(tuple(ids), tuple(header[1:]), np.asarray(rows, dtype=np.float64))
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


def write_targets(path: str | Path, table: TargetTable, comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write("id," + ",".join(table.properties) + "\n")
        for mol_id, row in zip(table.ids, table.values):
            fh.write(_writable_id(mol_id) + "," + ",".join(_format_float(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Train/test splits


@dataclass(frozen=True)
class SplitSpec:
    """A disjoint train/test id split together with the seed that produced it."""

    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if not self.train_ids or not self.test_ids:
            raise ValidationError("train and test sets must both be non-empty")
        overlap = set(self.train_ids) & set(self.test_ids)
        if overlap:
            raise ValidationError(f"train/test overlap: {sorted(overlap)[:5]}")
        _check_ids(self.train_ids)
        _check_ids(self.test_ids)
        object.__setattr__(self, "train_ids", tuple(self.train_ids))
        object.__setattr__(self, "test_ids", tuple(self.test_ids))

    @property
    def n_train(self) -> int:
        return len(self.train_ids)

    @property
    def n_test(self) -> int:
        return len(self.test_ids)


def make_split(ids: Sequence[str], n_train: int, n_test: int, seed: int) -> SplitSpec:
    """Draw disjoint uniform train/test subsets of ``ids``, deterministically in ``seed``."""
    if n_train < 1 or n_test < 1:
        raise ValidationError("n_train and n_test must both be >= 1")
    if n_train + n_test > len(ids):
        raise ValidationError(f"n_train + n_test = {n_train + n_test} exceeds pool size {len(ids)}")
    _check_ids(ids)
    perm = np.random.default_rng(seed).permutation(len(ids))
    train = tuple(ids[i] for i in perm[:n_train])
    test = tuple(ids[i] for i in perm[n_train : n_train + n_test])
    return SplitSpec(train, test, seed)


def read_split(path: str | Path) -> SplitSpec:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict) or not {"seed", "train", "test"} <= set(obj):
        raise ParseError(path, None, "split file must have 'seed', 'train' and 'test' keys")
    try:
        return SplitSpec(tuple(map(str, obj["train"])), tuple(map(str, obj["test"])), int(obj["seed"]))
    except ValidationError as exc:
        raise ParseError(path, None, str(exc)) from None


def write_split(path: str | Path, split: SplitSpec) -> None:
    payload = {"seed": split.seed, "train": list(split.train_ids), "test": list(split.test_ids)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
