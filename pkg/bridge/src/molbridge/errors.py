"""Error hierarchy for molecule parsing and representation export."""

from __future__ import annotations


class BridgeError(Exception):
    """Base class for all molbridge failures."""


class ManifestError(BridgeError):
    """An export request is incomplete or self-contradictory."""


class MoleculeParseError(BridgeError):
    """A molecule input file is malformed; carries the offending line."""

    def __init__(self, path: object, line: int | None, message: str) -> None:
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class DependencyError(BridgeError):
    """A representation needs an external package that is not installed."""


class ExportError(BridgeError):
    """A backend failed while computing a representation."""
