"""Writers for the portable dataset formats.

These emit the same text layouts the analysis side reads: fingerprint
files (``# d=<int>`` header plus ``<id> <bitstring>`` rows), feature
CSVs (``id,f0,...`` header), and local-environment JSON lines
(``{"id": ..., "atoms": [{"Z": ..., "v": [...]}]}``).  Floats are
written with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _comment_lines(comments: Iterable[str]) -> list[str]:
    lines = []
    for comment in comments:
        text = str(comment)
        if "\n" in text:
            raise ValueError("header comments must be single-line")
        lines.append(f"# {text}")
    return lines


def write_fingerprint_file(
    path: str | Path, ids: Sequence[str], bits: np.ndarray, comments: Iterable[str] = ()
) -> None:
    bits = np.asarray(bits, dtype=np.uint8)
    lines = _comment_lines(comments)
    lines.append(f"# d={bits.shape[1]}")
    for mol_id, row in zip(ids, bits):
        lines.append(f"{mol_id} {''.join('1' if b else '0' for b in row)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_feature_file(
    path: str | Path, ids: Sequence[str], values: np.ndarray, comments: Iterable[str] = ()
) -> None:
    values = np.asarray(values, dtype=np.float64)
    lines = _comment_lines(comments)
    lines.append("id," + ",".join(f"f{j}" for j in range(values.shape[1])))
    for mol_id, row in zip(ids, values):
        lines.append(mol_id + "," + ",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_local_env_file(
    path: str | Path,
    ids: Sequence[str],
    molecules: Sequence[tuple[Sequence[int], np.ndarray]],
    comments: Iterable[str] = (),
) -> None:
    """``molecules`` pairs each molecule's atomic numbers with its
    (n_atoms, d) per-atom descriptor matrix."""
    lines = _comment_lines(comments)
    for mol_id, (numbers, vectors) in zip(ids, molecules):
        vectors = np.asarray(vectors, dtype=np.float64)
        atoms = [
            {"Z": int(z), "v": [float(v) for v in vec]} for z, vec in zip(numbers, vectors)
        ]
        lines.append(json.dumps({"id": mol_id, "atoms": atoms}, separators=(",", ":")))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
