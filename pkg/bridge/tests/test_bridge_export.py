"""Export pipeline: manifests, dispatch, file outputs, backend seams.

External descriptor packages are exercised through fake backends
injected with monkeypatch; tests marked with importorskip additionally
verify against the real package when it is installed.
"""

from __future__ import annotations

import importlib.util
import logging

import numpy as np
import pytest

import molbridge.backends as backends_module
from molbridge.errors import DependencyError, ExportError, ManifestError
from molbridge.export import ExportManifest, export, manifest_for
from molbridge.molfiles import read_xyz

# Reading exported files back through the analysis-side package is the
# portability contract these exports exist for.
from molkern.dataset_io import read_features, read_fingerprints, read_local_envs

TWO_MOLECULES_XYZ = """\
3
water
O 0.0 0.0 0.119
H 0.0 0.763 -0.477
H 0.0 -0.763 -0.477
2
hydrogen
H 0.0 0.0 0.0
H 0.0 0.0 1.0
"""

SMILES = "C methane\nBAD broken\nC copy\nCCO ethanol\n"


@pytest.fixture
def xyz_file(tmp_path):
    path = tmp_path / "mols.xyz"
    path.write_text(TWO_MOLECULES_XYZ)
    return path


@pytest.fixture
def smiles_file(tmp_path):
    path = tmp_path / "mols.smi"
    path.write_text(SMILES)
    return path


def fake_ecfp_rows(records, radius, nbits):
    rows = []
    for record in records:
        if record.smiles == "BAD":
            rows.append(None)
            continue
        row = np.zeros(nbits, dtype=np.uint8)
        row[sum(ord(c) for c in record.smiles) % nbits] = 1
        rows.append(row)
    return rows, "fake-fp 1.0"


def fake_local_rows(molecules, *args):
    rows = [
        np.column_stack([np.asarray(mol.numbers, dtype=np.float64), mol.coords])
        for mol in molecules
    ]
    return rows, "fake-local 1.0"


# ---------------------------------------------------------------------------
# Manifests


def test_manifest_unknown_representation(tmp_path):
    with pytest.raises(ManifestError, match="unknown representation"):
        manifest_for("morgan", tmp_path / "a", tmp_path / "b")


def test_manifest_kind_congruence(tmp_path):
    with pytest.raises(ManifestError, match="reads smiles input"):
        ExportManifest(tmp_path / "a", "xyz", "ecfp", tmp_path / "b")
    with pytest.raises(ManifestError, match="reads xyz input"):
        ExportManifest(tmp_path / "a", "smiles", "cm", tmp_path / "b")
    with pytest.raises(ManifestError, match="'smiles' or 'xyz'"):
        ExportManifest(tmp_path / "a", "sdf", "cm", tmp_path / "b")


def test_manifest_param_validation(tmp_path):
    with pytest.raises(ManifestError, match="unknown parameter"):
        manifest_for("cm", tmp_path / "a", tmp_path / "b", radius=3)
    with pytest.raises(ManifestError, match="needs parameter"):
        manifest_for("embedding", tmp_path / "a", tmp_path / "b")


def test_manifest_for_drops_none_params(tmp_path):
    manifest = manifest_for("ecfp", tmp_path / "a", tmp_path / "b", radius=None, nbits=None)
    assert manifest.params == {}
    assert manifest.input_kind == "smiles"
    assert manifest.output_format == "fingerprint"


def test_export_validates_input_and_jobs(tmp_path, xyz_file):
    missing = manifest_for("cm", tmp_path / "nope.xyz", tmp_path / "out.csv")
    with pytest.raises(ManifestError, match="does not exist"):
        export(missing)
    with pytest.raises(ManifestError, match="jobs must be >= 1"):
        export(manifest_for("cm", xyz_file, tmp_path / "out.csv"), jobs=0)


def test_bad_numeric_params(tmp_path, xyz_file):
    with pytest.raises(ManifestError, match="'max_atoms' must be an integer"):
        export(manifest_for("cm", xyz_file, tmp_path / "o.csv", max_atoms="many"))
    with pytest.raises(ManifestError, match="'max_atoms' must be >= 1"):
        export(manifest_for("cm", xyz_file, tmp_path / "o.csv", max_atoms=0))
    with pytest.raises(ManifestError, match="'rcut' must be a number"):
        export(manifest_for("soap", xyz_file, tmp_path / "o.jsonl", rcut="far"))
    with pytest.raises(ManifestError, match="'rcut' must be positive"):
        export(manifest_for("fchl19", xyz_file, tmp_path / "o.jsonl", rcut=-1.0))


# ---------------------------------------------------------------------------
# Native exports -> files the analysis readers accept


def test_cm_export_reads_back(tmp_path, xyz_file):
    out = tmp_path / "cm.csv"
    summary = export(manifest_for("cm", xyz_file, out))
    assert (summary.n_molecules, summary.width, summary.backend) == (2, 3, "native")
    dataset = read_features(out)
    assert dataset.ids == ("m000001", "m000002")
    assert dataset.values.shape == (2, 3)
    assert dataset.values[1].tolist() == [1.5, -0.5, 0.0]


def test_cm_declared_padding(tmp_path, xyz_file):
    out = tmp_path / "cm5.csv"
    summary = export(manifest_for("cm", xyz_file, out, max_atoms=5))
    assert summary.width == 5
    values = read_features(out).values
    assert values.shape == (2, 5)
    assert values[0, 3:].tolist() == [0.0, 0.0]


def test_cm_padding_conflict(tmp_path, xyz_file):
    with pytest.raises(ExportError, match="exceeds the declared padding width"):
        export(manifest_for("cm", xyz_file, tmp_path / "cm2.csv", max_atoms=2))


def test_bob_export_reads_back(tmp_path, xyz_file):
    out = tmp_path / "bob.csv"
    summary = export(manifest_for("bob", xyz_file, out))
    assert (summary.n_molecules, summary.width) == (2, 6)
    dataset = read_features(out)
    assert dataset.values.shape == (2, 6)
    assert "bags[6] = H:2 H-H:1 H-O:2 O:1" in out.read_text()


def test_native_export_parallel_matches_serial(tmp_path, xyz_file):
    serial = tmp_path / "serial.csv"
    parallel = tmp_path / "parallel.csv"
    export(manifest_for("cm", xyz_file, serial), jobs=1)
    export(manifest_for("cm", xyz_file, parallel), jobs=2)
    assert serial.read_bytes() == parallel.read_bytes()


def test_rerun_is_byte_identical(tmp_path, xyz_file):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    export(manifest_for("bob", xyz_file, first))
    export(manifest_for("bob", xyz_file, second))
    assert first.read_bytes() == second.read_bytes()


# ---------------------------------------------------------------------------
# Package-backed exports through fake backends


def test_ecfp_skips_unparsable_with_line_numbers(tmp_path, smiles_file, monkeypatch, caplog):
    monkeypatch.setattr(backends_module, "ecfp_rows", fake_ecfp_rows)
    out = tmp_path / "fp.txt"
    with caplog.at_level(logging.WARNING, logger="molbridge.export"):
        summary = export(manifest_for("ecfp", smiles_file, out, nbits=64))
    assert summary.skipped == ((2, "broken", "unparsable SMILES"),)
    assert "line 2" in caplog.text and "broken" in caplog.text
    dataset = read_fingerprints(out)
    assert dataset.ids == ("methane", "copy", "ethanol")
    assert dataset.bits.shape == (3, 64)
    # duplicate SMILES produce identical rows
    assert dataset.bits[0].tolist() == dataset.bits[1].tolist()
    assert "params: radius=3 nbits=64" in out.read_text()


def test_ecfp_all_unparsable(tmp_path, monkeypatch):
    monkeypatch.setattr(backends_module, "ecfp_rows", fake_ecfp_rows)
    path = tmp_path / "bad.smi"
    path.write_text("BAD a\nBAD b\n")
    with pytest.raises(ExportError, match="no molecule could be parsed"):
        export(manifest_for("ecfp", path, tmp_path / "fp.txt"))


@pytest.mark.parametrize("representation", ["soap", "acsf", "fchl19"])
def test_local_export_reads_back(tmp_path, xyz_file, monkeypatch, representation):
    monkeypatch.setattr(backends_module, f"{representation}_rows", fake_local_rows)
    out = tmp_path / f"{representation}.jsonl"
    summary = export(manifest_for(representation, xyz_file, out))
    assert (summary.n_molecules, summary.width) == (2, 4)
    dataset = read_local_envs(out)
    assert dataset.ids == ("m000001", "m000002")
    water = dataset.molecules[0]
    assert water.zs.tolist() == [8, 1, 1]
    assert water.descriptors.shape == (3, 4)
    assert water.descriptors[0, 0] == 8.0  # fake: first column is Z


def test_local_width_mismatch_rejected(tmp_path, xyz_file, monkeypatch):
    def ragged(molecules, *args):
        rows = [np.zeros((mol.n_atoms, 3 + i)) for i, mol in enumerate(molecules)]
        return rows, "ragged 1.0"

    monkeypatch.setattr(backends_module, "soap_rows", ragged)
    with pytest.raises(ExportError, match="descriptor length mismatch"):
        export(manifest_for("soap", xyz_file, tmp_path / "s.jsonl"))


def test_slatm_export_through_fake_backend(tmp_path, xyz_file, monkeypatch):
    def fake_slatm(molecules):
        return [np.full(5, float(mol.n_atoms)) for mol in molecules], "fake-slatm 1.0"

    monkeypatch.setattr(backends_module, "slatm_rows", fake_slatm)
    out = tmp_path / "slatm.csv"
    summary = export(manifest_for("slatm", xyz_file, out))
    assert summary.width == 5
    assert read_features(out).values[0].tolist() == [3.0] * 5


def test_embedding_export_through_fake_backend(tmp_path, smiles_file, monkeypatch):
    def fake_embed(records, model_id):
        return [np.array([float(len(r.smiles)), 1.0]) for r in records], f"fake-lm model={model_id}"

    monkeypatch.setattr(backends_module, "embedding_rows", fake_embed)
    out = tmp_path / "emb.csv"
    summary = export(manifest_for("embedding", smiles_file, out, model="tiny"))
    assert summary.width == 2
    dataset = read_features(out)
    assert dataset.n == 4
    assert "model=tiny" in out.read_text()


def test_inconsistent_backend_row_count_rejected(tmp_path, smiles_file, monkeypatch):
    monkeypatch.setattr(backends_module, "ecfp_rows", lambda records, r, n: ([], "short 1.0"))
    with pytest.raises(ExportError, match="returned 0 rows for 4 molecules"):
        export(manifest_for("ecfp", smiles_file, tmp_path / "fp.txt"))


# ---------------------------------------------------------------------------
# Real external packages: absence raises, presence is verified


def test_missing_fingerprint_package_raises():
    if importlib.util.find_spec("rdkit") is not None:
        pytest.skip("cheminformatics package installed; absence path not reachable")
    with pytest.raises(DependencyError, match="rdkit"):
        backends_module.ecfp_rows((), 3, 64)


def test_ecfp_matches_reference_library(tmp_path, smiles_file):
    chem = pytest.importorskip("rdkit.Chem")
    out = tmp_path / "fp.txt"
    export(manifest_for("ecfp", smiles_file, out))
    dataset = read_fingerprints(out)
    from rdkit.Chem import AllChem

    mol = chem.MolFromSmiles("C")
    reference = AllChem.GetMorganFingerprintAsBitVect(mol, 3, nBits=2048)
    row = dataset.bits[list(dataset.ids).index("methane")]
    assert sorted(np.nonzero(row)[0].tolist()) == sorted(reference.GetOnBits())
    assert row.sum() >= 1


def test_slatm_matches_reference_library(tmp_path, xyz_file):
    pytest.importorskip("qml")
    from qml.representations import generate_slatm, get_slatm_mbtypes

    out = tmp_path / "slatm.csv"
    export(manifest_for("slatm", xyz_file, out))
    molecules = read_xyz(xyz_file)
    mbtypes = get_slatm_mbtypes([np.asarray(m.numbers) for m in molecules])
    reference = generate_slatm(molecules[0].coords, np.asarray(molecules[0].numbers), mbtypes)
    assert np.allclose(read_features(out).values[0], reference)


def test_soap_matches_reference_library(tmp_path, xyz_file):
    pytest.importorskip("dscribe")
    pytest.importorskip("ase")
    from ase import Atoms
    from dscribe.descriptors import SOAP

    out = tmp_path / "soap.jsonl"
    export(manifest_for("soap", xyz_file, out, rcut=6.0))
    molecules = read_xyz(xyz_file)
    soap = SOAP(species=[1, 8], r_cut=6.0, n_max=8, l_max=6, periodic=False, sparse=False)
    reference = soap.create(Atoms(numbers=list(molecules[0].numbers), positions=molecules[0].coords))
    assert np.allclose(read_local_envs(out).molecules[0].descriptors, reference)
