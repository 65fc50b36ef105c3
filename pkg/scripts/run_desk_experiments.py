#!/usr/bin/env python3
"""Run the desk-scale kernel-spectrum study end to end.

Over one synthetic dataset (see ``make_fixtures.py``) this drives the
command-line pipeline for seven representation/kernel pairs:

  features      x  gaussian, laplacian, linear
  fingerprints  x  tanimoto, dice, min-max, russel-rao

For each pair it computes the training Gram spectrum, the spectral
richness metrics, tuned ridge-regression scores, and the truncation
sweep; the Gaussian run additionally records a learning curve.  All
runs are then pooled into one metric-vs-accuracy correlation report.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from molkern.cli import main as molkern

FEATURE_KERNELS = (("gaussian", 'sigma_l = 100.0'), ("laplacian", 'sigma_l = 100.0'), ("linear", None))
FINGERPRINT_KERNELS = (("tanimoto", None), ("dice", None), ("min-max", None), ("russel-rao", None))
LAMBDA_GRID = "[1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1.0]"


def config_text(
    rep_path: Path,
    kind: str,
    label: str,
    family: str,
    kernel_extra: str | None,
    targets_path: Path,
    cache_path: Path,
    args: argparse.Namespace,
    learning_curve: bool,
) -> str:
    lines = [
        "[representation]",
        f'path = "{rep_path}"',
        f'kind = "{kind}"',
        f'label = "{label}"',
        "",
        "[kernel]",
        f'family = "{family}"',
    ]
    if kernel_extra:
        lines.append(kernel_extra)
    lines += [
        "",
        "[targets]",
        f'path = "{targets_path}"',
        "",
        "[split]",
        f"n_train = {args.n_train}",
        f"n_test = {args.n_test}",
        f"seeds = {list(args.seeds)}",
        "",
        "[regression]",
        f"lambda_grid = {LAMBDA_GRID}",
        "",
        "[truncation]",
        'mode = "both"',
        "",
        "[cache]",
        f'gram = "{cache_path}"',
    ]
    if learning_curve:
        sizes = sorted({max(20, args.n_train // 5), args.n_train // 2, args.n_train})
        lines += ["", "[learning_curve]", f"sizes = {sizes}", f"test_size = {args.n_test}"]
    return "\n".join(lines) + "\n"


def run(argv: list[str]) -> None:
    rc = molkern(argv)
    if rc != 0:
        raise SystemExit(f"molkern {' '.join(argv)} failed with exit code {rc}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", default="data", help="directory produced by make_fixtures.py")
    parser.add_argument("--out-dir", default="results", help="directory for all run outputs")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes per kernel evaluation")
    parser.add_argument("--n-train", type=int, default=500)
    parser.add_argument("--n-test", type=int, default=2000)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1], help="train/test split seeds")
    args = parser.parse_args(argv)

    data = Path(args.data_dir)
    targets = data / "targets.csv"
    reps = {"feature": data / "features.csv", "fingerprint": data / "fingerprints.csv"}
    missing = [str(p) for p in (targets, *reps.values()) if not p.is_file()]
    if missing:
        parser.error(f"missing data files {missing}; run scripts/make_fixtures.py first")

    out = Path(args.out_dir)
    (out / "configs").mkdir(parents=True, exist_ok=True)
    (out / "cache").mkdir(parents=True, exist_ok=True)

    plan = [("feature", "desk-feat", fam, extra) for fam, extra in FEATURE_KERNELS]
    plan += [("fingerprint", "desk-fp", fam, extra) for fam, extra in FINGERPRINT_KERNELS]

    common = ["--out-dir", str(out)]
    if args.jobs is not None:
        common += ["--jobs", str(args.jobs)]

    run_labels = []
    for kind, label, family, extra in plan:
        run_label = f"{label}__{family}"
        run_labels.append(run_label)
        config = out / "configs" / f"{run_label}.toml"
        config.write_text(
            config_text(
                reps[kind].resolve(),
                kind,
                label,
                family,
                extra,
                targets.resolve(),
                (out / "cache" / f"{run_label}.kgram").resolve(),
                args,
                learning_curve=(family == "gaussian"),
            ),
            encoding="utf-8",
        )
        subcommands = ["gram", "metrics", "krr", "truncate"]
        if family == "gaussian":
            subcommands.append("learning-curve")
        for name in subcommands:
            print(f"== {run_label}: {name}", flush=True)
            run([name, "--config", str(config)] + common)

    grouping = out / "grouping.json"
    grouping.write_text(json.dumps({"desk-feat": "desk", "desk-fp": "desk"}, indent=2) + "\n", encoding="utf-8")
    print("== correlate", flush=True)
    run(
        ["correlate", "--grouping", str(grouping)]
        + ["--krr"] + [str(out / "krr" / r / "report.json") for r in run_labels]
        + ["--metrics"] + [str(out / "metrics" / r / "report.json") for r in run_labels]
        + common
    )

    print("\nrun                          avg R^2    u0 pct95")
    for run_label in run_labels:
        krr = json.loads((out / "krr" / run_label / "report.json").read_text(encoding="utf-8"))
        trunc = json.loads((out / "truncate" / run_label / "report.json").read_text(encoding="utf-8"))
        pct95 = trunc["modes"]["regularized"]["u0"]["thresholds"]["pct95"]
        print(f"{run_label:<28} {krr['avg_r2']:>7.4f} {pct95:>10}")

    correlation = json.loads((out / "correlate" / "report.json").read_text(encoding="utf-8"))
    print("\nmetric-vs-accuracy correlations (group 'desk'):")
    for metric, entry in correlation["groups"].get("desk", {}).items():
        print(f"  {metric:<16} r = {entry['r']:+.3f}  [{entry['ci_low']:+.3f}, {entry['ci_high']:+.3f}]")
    print(f"\nfull outputs under {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
