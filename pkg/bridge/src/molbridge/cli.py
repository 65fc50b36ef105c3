"""Command-line interface: ``molbridge export``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import DependencyError, ExportError, ManifestError, MoleculeParseError
from .export import (
    DEFAULT_ECFP_NBITS,
    DEFAULT_ECFP_RADIUS,
    REPRESENTATIONS,
    export,
    manifest_for,
)

log = logging.getLogger("molbridge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molbridge",
        description="Export molecular representations from SMILES/XYZ files into portable dataset formats.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="convert a molecule file into one representation file")
    p.add_argument("--kind", required=True, choices=REPRESENTATIONS, help="representation to export")
    p.add_argument("--in", dest="input_path", required=True, help="SMILES list or XYZ file")
    p.add_argument("--out", dest="output_path", required=True, help="output representation file")
    p.add_argument("--radius", type=int, default=None, help=f"ecfp radius (default {DEFAULT_ECFP_RADIUS})")
    p.add_argument("--nbits", type=int, default=None, help=f"ecfp bit length (default {DEFAULT_ECFP_NBITS})")
    p.add_argument("--model", default=None, help="pretrained model identifier (embedding)")
    p.add_argument("--rcut", type=float, default=None, help="local-environment cutoff radius, Angstrom")
    p.add_argument("--max-atoms", type=int, default=None, help="padding width for cm (default: dataset max)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for native representations")
    return parser


_FLAG_PARAMS = ("radius", "nbits", "model", "rcut", "max_atoms")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        params = {name: getattr(args, name) for name in _FLAG_PARAMS if getattr(args, name) is not None}
        manifest = manifest_for(args.kind, args.input_path, args.output_path, **params)
        summary = export(manifest, jobs=args.jobs)
    except (ManifestError, MoleculeParseError, DependencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4

    for line, mol_id, reason in summary.skipped:
        print(f"skipped line {line} ({mol_id}): {reason}", file=sys.stderr)
    print(f"wrote {summary.output_path} ({summary.n_molecules} molecules, width {summary.width})")
    return 0
