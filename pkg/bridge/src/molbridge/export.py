"""Export molecules to portable representation files.

One ExportManifest describes one export: an input file (SMILES list or
XYZ), a representation, its parameters, and an output path.  Native
representations (``cm``, ``bob``) need only NumPy; the others delegate
to external packages through :mod:`molbridge.backends`.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from . import backends
from .coulomb import bob_layout, bob_vector, bob_width, cm_eigenvalues, describe_bob_layout
from .errors import ExportError, ManifestError
from .molfiles import Molecule3D, SmilesRecord, read_smiles, read_xyz
from .writers import write_feature_file, write_fingerprint_file, write_local_env_file

log = logging.getLogger("molbridge.export")

#: representation -> (input kind, output format, allowed params, required params)
_SPECS: dict[str, tuple[str, str, tuple[str, ...], tuple[str, ...]]] = {
    "ecfp": ("smiles", "fingerprint", ("radius", "nbits"), ()),
    "cm": ("xyz", "feature", ("max_atoms",), ()),
    "bob": ("xyz", "feature", (), ()),
    "slatm": ("xyz", "feature", (), ()),
    "soap": ("xyz", "local", ("rcut",), ()),
    "acsf": ("xyz", "local", ("rcut",), ()),
    "fchl19": ("xyz", "local", ("rcut",), ()),
    "embedding": ("smiles", "feature", ("model",), ("model",)),
}

REPRESENTATIONS = tuple(sorted(_SPECS))
DEFAULT_ECFP_RADIUS = 3
DEFAULT_ECFP_NBITS = 2048
DEFAULT_RCUT = 6.0


@dataclass(frozen=True)
class ExportManifest:
    """A validated export request."""

    input_path: Path
    input_kind: str  # "smiles" | "xyz"
    representation: str
    output_path: Path
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.representation not in _SPECS:
            raise ManifestError(
                f"unknown representation {self.representation!r}; choose from {REPRESENTATIONS}"
            )
        expected_kind, _, allowed, required = _SPECS[self.representation]
        if self.input_kind not in ("smiles", "xyz"):
            raise ManifestError(f"input kind must be 'smiles' or 'xyz', got {self.input_kind!r}")
        if self.input_kind != expected_kind:
            raise ManifestError(
                f"representation {self.representation!r} reads {expected_kind} input, got {self.input_kind!r}"
            )
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ManifestError(
                f"unknown parameter(s) {sorted(unknown)} for {self.representation!r}; allowed: {sorted(allowed)}"
            )
        missing = [k for k in required if k not in self.params]
        if missing:
            raise ManifestError(f"representation {self.representation!r} needs parameter(s) {missing}")
        object.__setattr__(self, "input_path", Path(self.input_path))
        object.__setattr__(self, "output_path", Path(self.output_path))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def output_format(self) -> str:
        return _SPECS[self.representation][1]


def manifest_for(representation: str, input_path: str | Path, output_path: str | Path, **params) -> ExportManifest:
    """Build a manifest, inferring the input kind from the representation."""
    spec = _SPECS.get(representation)
    if spec is None:
        raise ManifestError(f"unknown representation {representation!r}; choose from {REPRESENTATIONS}")
    clean = {k: v for k, v in params.items() if v is not None}
    return ExportManifest(Path(input_path), spec[0], representation, Path(output_path), clean)


@dataclass(frozen=True)
class ExportSummary:
    """What an export produced."""

    representation: str
    output_path: Path
    n_molecules: int
    width: int  # vector length (feature/fingerprint) or per-atom length (local)
    backend: str
    skipped: tuple[tuple[int, str, str], ...] = ()  # (input line, id, reason)


def _map_ordered(fn: Callable, items, jobs: int) -> list:
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (jobs * 4))))
    return [fn(item) for item in items]


def _int_param(manifest: ExportManifest, key: str, default: int, minimum: int) -> int:
    value = manifest.params.get(key, default)
    try:
        value = int(value)
    except (TypeError, ValueError):
        raise ManifestError(f"parameter {key!r} must be an integer, got {value!r}") from None
    if value < minimum:
        raise ManifestError(f"parameter {key!r} must be >= {minimum}, got {value}")
    return value


def _float_param(manifest: ExportManifest, key: str, default: float | None) -> float | None:
    value = manifest.params.get(key, default)
    if value is None:
        return None
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ManifestError(f"parameter {key!r} must be a number, got {value!r}") from None
    if not (value > 0 and np.isfinite(value)):
        raise ManifestError(f"parameter {key!r} must be positive and finite, got {value}")
    return value


def _header(manifest: ExportManifest, backend: str, extras: tuple[str, ...] = ()) -> tuple[str, ...]:
    from . import __version__

    return (
        f"generated-by: molbridge {__version__}",
        f"representation: {manifest.representation}",
        f"backend: {backend}",
        f"source: {manifest.input_path.name}",
        *extras,
    )


def _export_ecfp(manifest: ExportManifest, jobs: int) -> ExportSummary:
    radius = _int_param(manifest, "radius", DEFAULT_ECFP_RADIUS, 0)
    nbits = _int_param(manifest, "nbits", DEFAULT_ECFP_NBITS, 1)
    records = read_smiles(manifest.input_path)
    rows, backend = backends.ecfp_rows(records, radius, nbits)
    if len(rows) != len(records):
        raise ExportError(f"backend returned {len(rows)} rows for {len(records)} molecules")
    kept_ids: list[str] = []
    kept_rows: list[np.ndarray] = []
    skipped: list[tuple[int, str, str]] = []
    for record, row in zip(records, rows):
        if row is None:
            skipped.append((record.line, record.mol_id, "unparsable SMILES"))
            log.warning("line %d: skipping %s: unparsable SMILES", record.line, record.mol_id)
            continue
        kept_ids.append(record.mol_id)
        kept_rows.append(np.asarray(row, dtype=np.uint8))
    if not kept_rows:
        raise ExportError("no molecule could be parsed")
    write_fingerprint_file(
        manifest.output_path,
        kept_ids,
        np.vstack(kept_rows),
        _header(manifest, backend, (f"params: radius={radius} nbits={nbits}",)),
    )
    return ExportSummary(
        manifest.representation, manifest.output_path, len(kept_ids), nbits, backend, tuple(skipped)
    )


def _export_feature_rows(
    manifest: ExportManifest, ids: list[str], rows: list[np.ndarray], backend: str, extras: tuple[str, ...]
) -> ExportSummary:
    widths = {row.shape[0] for row in rows}
    if len(widths) != 1:
        raise ExportError(f"backend produced inconsistent vector lengths {sorted(widths)}")
    matrix = np.vstack([row[None, :] for row in rows])
    write_feature_file(manifest.output_path, ids, matrix, _header(manifest, backend, extras))
    return ExportSummary(manifest.representation, manifest.output_path, len(ids), matrix.shape[1], backend)


def _export_cm(manifest: ExportManifest, jobs: int) -> ExportSummary:
    molecules = read_xyz(manifest.input_path)
    observed = max(mol.n_atoms for mol in molecules)
    width = _int_param(manifest, "max_atoms", observed, 1)
    rows = _map_ordered(partial(_cm_row, width=width), molecules, jobs)
    ids = [mol.mol_id for mol in molecules]
    return _export_feature_rows(manifest, ids, rows, "native", (f"params: max_atoms={width}",))


def _cm_row(mol: Molecule3D, width: int) -> np.ndarray:
    return cm_eigenvalues(mol, width)


def _export_bob(manifest: ExportManifest, jobs: int) -> ExportSummary:
    molecules = read_xyz(manifest.input_path)
    layout = bob_layout(molecules)
    rows = _map_ordered(partial(_bob_row, layout=layout), molecules, jobs)
    ids = [mol.mol_id for mol in molecules]
    extras = (f"params: bags[{bob_width(layout)}] = {describe_bob_layout(layout)}",)
    return _export_feature_rows(manifest, ids, rows, "native", extras)


def _bob_row(mol: Molecule3D, layout) -> np.ndarray:
    return bob_vector(mol, layout)


def _export_slatm(manifest: ExportManifest, jobs: int) -> ExportSummary:
    molecules = read_xyz(manifest.input_path)
    rows, backend = backends.slatm_rows(molecules)
    ids = [mol.mol_id for mol in molecules]
    return _export_feature_rows(manifest, ids, [np.asarray(r, dtype=np.float64) for r in rows], backend, ())


def _export_embedding(manifest: ExportManifest, jobs: int) -> ExportSummary:
    records = read_smiles(manifest.input_path)
    model = str(manifest.params["model"])
    rows, backend = backends.embedding_rows(records, model)
    ids = [r.mol_id for r in records]
    extras = (f"params: model={model}",)
    return _export_feature_rows(manifest, ids, [np.asarray(r, dtype=np.float64) for r in rows], backend, extras)


def _export_local(manifest: ExportManifest, jobs: int) -> ExportSummary:
    molecules = read_xyz(manifest.input_path)
    rcut = _float_param(manifest, "rcut", None)
    if manifest.representation == "soap":
        rows, backend = backends.soap_rows(molecules, DEFAULT_RCUT if rcut is None else rcut)
        extras = (f"params: rcut={DEFAULT_RCUT if rcut is None else rcut}",)
    elif manifest.representation == "acsf":
        rows, backend = backends.acsf_rows(molecules, DEFAULT_RCUT if rcut is None else rcut)
        extras = (f"params: rcut={DEFAULT_RCUT if rcut is None else rcut}",)
    else:
        rows, backend = backends.fchl19_rows(molecules, rcut)
        extras = (f"params: rcut={'backend-default' if rcut is None else rcut}",)
    if len(rows) != len(molecules):
        raise ExportError(f"backend returned {len(rows)} rows for {len(molecules)} molecules")
    widths = set()
    entries: list[tuple[tuple[int, ...], np.ndarray]] = []
    for mol, per_atom in zip(molecules, rows):
        per_atom = np.asarray(per_atom, dtype=np.float64)
        if per_atom.ndim != 2 or per_atom.shape[0] != mol.n_atoms:
            raise ExportError(f"{mol.mol_id}: backend row shape {per_atom.shape} does not match {mol.n_atoms} atoms")
        widths.add(per_atom.shape[1])
        entries.append((mol.numbers, per_atom))
    if len(widths) != 1:
        raise ExportError(f"descriptor length mismatch between molecules: {sorted(widths)}")
    ids = [mol.mol_id for mol in molecules]
    write_local_env_file(manifest.output_path, ids, entries, _header(manifest, backend, extras))
    return ExportSummary(manifest.representation, manifest.output_path, len(ids), widths.pop(), backend)


_EXPORTERS: dict[str, Callable[[ExportManifest, int], ExportSummary]] = {
    "ecfp": _export_ecfp,
    "cm": _export_cm,
    "bob": _export_bob,
    "slatm": _export_slatm,
    "soap": _export_local,
    "acsf": _export_local,
    "fchl19": _export_local,
    "embedding": _export_embedding,
}


def export(manifest: ExportManifest, jobs: int = 1) -> ExportSummary:
    """Run one export and return what was written."""
    if not manifest.input_path.is_file():
        raise ManifestError(f"input file does not exist: {manifest.input_path}")
    if jobs < 1:
        raise ManifestError(f"jobs must be >= 1, got {jobs}")
    manifest.output_path.parent.mkdir(parents=True, exist_ok=True)
    summary = _EXPORTERS[manifest.representation](manifest, jobs)
    log.info(
        "wrote %s: %d molecules, width %d (%s)",
        summary.output_path,
        summary.n_molecules,
        summary.width,
        summary.backend,
    )
    return summary
