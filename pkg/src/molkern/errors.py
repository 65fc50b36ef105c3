"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: configuration and validation
problems exit 2, numerical failures exit 3, and I/O errors (plain
OSError) exit 4.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Malformed input data or an argument outside its contract."""


class ParseError(ValidationError):
    """A file failed validation; carries the path and 1-based line number."""

    def __init__(self, path: object, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class ConfigError(ValidationError):
    """Invalid run configuration (bad TOML, unknown keys, bad combinations)."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed or left an unacceptable residual."""
