"""Export molecular representations from SMILES/XYZ files into portable dataset formats."""

from .coulomb import bob_layout, bob_vector, cm_eigenvalues, coulomb_matrix
from .errors import BridgeError, DependencyError, ExportError, ManifestError, MoleculeParseError
from .export import (
    REPRESENTATIONS,
    ExportManifest,
    ExportSummary,
    export,
    manifest_for,
)
from .molfiles import Molecule3D, SmilesRecord, read_smiles, read_xyz

__version__ = "0.1.0"
