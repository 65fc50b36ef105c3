"""Wrappers over external descriptor ecosystems, import-guarded.

Each function returns ``(rows, version_string)``; the version string is
recorded in the output file header so exports are attributable to a
backend release.  A missing package raises DependencyError with the
package name, leaving native representations fully usable without any
of these installed.
"""

from __future__ import annotations

import importlib
from typing import TYPE_CHECKING

import numpy as np

from .errors import DependencyError, ExportError

if TYPE_CHECKING:  # pragma: no cover
    from .molfiles import Molecule3D, SmilesRecord


def _require(name: str):
    try:
        return importlib.import_module(name)
    except ImportError:
        raise DependencyError(
            f"this representation needs the {name!r} package, which is not installed"
        ) from None


def _version(module) -> str:
    return str(getattr(module, "__version__", "unknown"))


def _species(molecules: "tuple[Molecule3D, ...]") -> list[int]:
    return sorted({z for mol in molecules for z in mol.numbers})


def ecfp_rows(
    records: "tuple[SmilesRecord, ...]", radius: int, nbits: int
) -> tuple[list[np.ndarray | None], str]:
    """Circular substructure fingerprints; None rows mark unparsable SMILES."""
    chem = _require("rdkit.Chem")
    rdkit = _require("rdkit")
    try:
        generator_mod = importlib.import_module("rdkit.Chem.rdFingerprintGenerator")
        generator = generator_mod.GetMorganGenerator(radius=radius, fpSize=nbits)

        def fingerprint(mol):
            return generator.GetFingerprint(mol)

    except (ImportError, AttributeError):
        allchem = _require("rdkit.Chem.AllChem")

        def fingerprint(mol):
            return allchem.GetMorganFingerprintAsBitVect(mol, radius, nBits=nbits)

    rows: list[np.ndarray | None] = []
    for record in records:
        mol = chem.MolFromSmiles(record.smiles)
        if mol is None:
            rows.append(None)
            continue
        bits = fingerprint(mol)
        row = np.zeros(nbits, dtype=np.uint8)
        row[list(bits.GetOnBits())] = 1
        rows.append(row)
    return rows, f"rdkit {_version(rdkit)}"


def slatm_rows(molecules: "tuple[Molecule3D, ...]") -> tuple[list[np.ndarray], str]:
    """Global spectrum-of-London-and-ATM representation (package defaults)."""
    qml = _require("qml")
    representations = _require("qml.representations")
    nuclear = [np.asarray(mol.numbers, dtype=np.int64) for mol in molecules]
    mbtypes = representations.get_slatm_mbtypes(nuclear)
    rows = [
        np.asarray(representations.generate_slatm(mol.coords, numbers, mbtypes), dtype=np.float64)
        for mol, numbers in zip(molecules, nuclear)
    ]
    return rows, f"qml {_version(qml)}"


def fchl19_rows(
    molecules: "tuple[Molecule3D, ...]", rcut: float | None
) -> tuple[list[np.ndarray], str]:
    """Per-atom radial/angular symmetry-function representation."""
    qml = _require("qml")
    representations = _require("qml.representations")
    elements = _species(molecules)
    kwargs = {} if rcut is None else {"rcut": float(rcut)}
    rows = [
        np.asarray(
            representations.generate_fchl_acsf(
                np.asarray(mol.numbers, dtype=np.int64), mol.coords, elements=elements, **kwargs
            ),
            dtype=np.float64,
        )
        for mol in molecules
    ]
    return rows, f"qml {_version(qml)}"


def _ase_atoms(mol: "Molecule3D"):
    ase = _require("ase")
    return ase.Atoms(numbers=list(mol.numbers), positions=np.asarray(mol.coords))


def soap_rows(
    molecules: "tuple[Molecule3D, ...]", rcut: float, nmax: int = 8, lmax: int = 6
) -> tuple[list[np.ndarray], str]:
    """Per-atom smooth-overlap descriptors (Gaussian radial basis)."""
    dscribe = _require("dscribe")
    descriptors = _require("dscribe.descriptors")
    soap = descriptors.SOAP(
        species=_species(molecules), r_cut=float(rcut), n_max=nmax, l_max=lmax, periodic=False, sparse=False
    )
    rows = [np.asarray(soap.create(_ase_atoms(mol)), dtype=np.float64) for mol in molecules]
    return rows, f"dscribe {_version(dscribe)}"


def acsf_rows(molecules: "tuple[Molecule3D, ...]", rcut: float) -> tuple[list[np.ndarray], str]:
    """Per-atom atom-centered symmetry functions (package default set)."""
    dscribe = _require("dscribe")
    descriptors = _require("dscribe.descriptors")
    acsf = descriptors.ACSF(species=_species(molecules), r_cut=float(rcut), periodic=False, sparse=False)
    rows = [np.asarray(acsf.create(_ase_atoms(mol)), dtype=np.float64) for mol in molecules]
    return rows, f"dscribe {_version(dscribe)}"


def embedding_rows(records: "tuple[SmilesRecord, ...]", model_id: str) -> tuple[list[np.ndarray], str]:
    """Pretrained-language-model embeddings of SMILES strings.

    Uses the model's dedicated pooled output when it exposes one and the
    mean over final-layer token states otherwise; the choice is recorded
    in the version string.
    """
    transformers = _require("transformers")
    torch = _require("torch")
    tokenizer = transformers.AutoTokenizer.from_pretrained(model_id)
    model = transformers.AutoModel.from_pretrained(model_id)
    model.eval()
    rows: list[np.ndarray] = []
    pooling = None
    with torch.no_grad():
        for record in records:
            encoded = tokenizer(record.smiles, return_tensors="pt", truncation=True)
            output = model(**encoded)
            pooled = getattr(output, "pooler_output", None)
            if pooled is not None:
                pooling = "pooled-output"
                vector = pooled[0]
            else:
                pooling = "mean-token"
                vector = output.last_hidden_state[0].mean(dim=0)
            rows.append(np.asarray(vector.cpu().numpy(), dtype=np.float64))
    if not rows:
        raise ExportError("no molecules to embed")
    return rows, f"transformers {_version(transformers)} model={model_id} pooling={pooling}"
