"""Command-line interface.

Subcommands cover the full experiment surface: ``gram`` (Gram cache +
spectrum), ``krr`` (tuned regression over split seeds), ``truncate``
(truncated-KRR sweep), ``metrics`` (spectral-richness report),
``correlate`` (metric-vs-performance correlation across runs) and
``learning-curve``.  Runs are configured by a TOML file plus a few
global flags; reruns with identical config and seeds produce
byte-identical result files.

Exit codes: 0 success, 2 configuration or validation error, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

try:  # tomllib landed in the standard library with 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import dataset_io
from .dataset_io import SplitSpec, TargetTable, make_split, write_split
from .errors import ConfigError, NumericalError, ParseError, ValidationError
from .experiments import (
    DEFAULT_LEVELS,
    MetricRow,
    correlate_metrics,
    evaluate,
    sanitize_json,
    truncation_sweep,
    learning_curve as run_learning_curve,
)
from .kernels import (
    FINGERPRINT_FAMILIES,
    ISO_FAMILIES,
    KernelConfig,
    KernelMatrix,
    cross,
    gram,
    read_gram_cache,
    write_gram_cache,
)
from .parallel import default_jobs
from .regression import DEFAULT_LAMBDA_GRID, FitReport
from .spectral import eigendecompose, spectrum_report

log = logging.getLogger(__name__)

KINDS = ("fingerprint", "feature", "local")
SWEEP_MODES = ("regularized", "ridgeless", "both")


@dataclass(frozen=True)
class RepresentationSpec:
    path: Path
    kind: str
    label: str


@dataclass(frozen=True)
class RunConfig:
    representation: RepresentationSpec
    kernel: KernelConfig
    targets_path: Path | None
    properties: tuple[str, ...] | None
    n_train: int
    n_test: int
    seeds: tuple[int, ...]
    lambda_grid: tuple[float, ...]
    folds: int
    standardize: bool
    levels: tuple[float, ...]
    sweep_mode: str
    lc_sizes: tuple[int, ...] | None
    lc_test_size: int | None
    cache_gram: Path | None

    @property
    def kernel_label(self) -> str:
        return self.kernel.family + ("-local" if self.kernel.local else "")

    @property
    def run_label(self) -> str:
        return f"{self.representation.label}__{self.kernel_label}"


def _section(raw: Mapping[str, Any], name: str, allowed: Sequence[str], required: bool = False) -> dict:
    body = raw.get(name)
    if body is None:
        if required:
            raise ConfigError(f"config is missing the [{name}] section")
        return {}
    if not isinstance(body, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(body) - set(allowed))
    if unknown:
        raise ConfigError(f"[{name}] has unknown keys {unknown}; allowed: {sorted(allowed)}")
    return dict(body)


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from None
    base = path.parent

    rep_raw = _section(raw, "representation", ("path", "kind", "label"), required=True)
    if "path" not in rep_raw or "kind" not in rep_raw:
        raise ConfigError("[representation] needs 'path' and 'kind'")
    kind = str(rep_raw["kind"])
    if kind not in KINDS:
        raise ConfigError(f"representation kind must be one of {KINDS}, got {kind!r}")
    rep_path = (base / str(rep_raw["path"])).resolve()
    if not rep_path.is_file():
        raise ConfigError(f"representation file does not exist: {rep_path}")
    rep = RepresentationSpec(rep_path, kind, str(rep_raw.get("label", rep_path.stem)))

    ker_raw = _section(raw, "kernel", ("family", "sigma_f", "sigma_l", "local", "classical"), required=True)
    if "family" not in ker_raw:
        raise ConfigError("[kernel] needs 'family'")
    try:
        kernel = KernelConfig(
            family=str(ker_raw["family"]),
            sigma_f=float(ker_raw.get("sigma_f", 1.0)),
            sigma_l=float(ker_raw.get("sigma_l", 100.0)),
            local=bool(ker_raw.get("local", kind == "local")),
            classical=bool(ker_raw.get("classical", False)),
        )
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
    _check_kind_kernel(kind, kernel)

    tgt_raw = _section(raw, "targets", ("path", "properties"))
    targets_path: Path | None = None
    properties: tuple[str, ...] | None = None
    if tgt_raw:
        if "path" not in tgt_raw:
            raise ConfigError("[targets] needs 'path'")
        targets_path = (base / str(tgt_raw["path"])).resolve()
        if not targets_path.is_file():
            raise ConfigError(f"targets file does not exist: {targets_path}")
        if "properties" in tgt_raw:
            properties = tuple(str(p) for p in tgt_raw["properties"])
            if not properties:
                raise ConfigError("[targets].properties must be non-empty when given")

    spl_raw = _section(raw, "split", ("n_train", "n_test", "seeds"))
    n_train = int(spl_raw.get("n_train", 500))
    n_test = int(spl_raw.get("n_test", 1000))
    seeds = tuple(int(s) for s in spl_raw.get("seeds", (0, 1, 2, 3, 4)))
    if n_train < 1 or n_test < 1 or not seeds:
        raise ConfigError("[split] needs positive n_train/n_test and at least one seed")

    reg_raw = _section(raw, "regression", ("lambda_grid", "folds", "standardize"))
    lambda_grid = tuple(float(v) for v in reg_raw.get("lambda_grid", DEFAULT_LAMBDA_GRID))
    folds = int(reg_raw.get("folds", 5))
    standardize = bool(reg_raw.get("standardize", False))
    if not lambda_grid or any(not (v >= 0 and math.isfinite(v)) for v in lambda_grid):
        raise ConfigError("[regression].lambda_grid must be non-empty, finite and non-negative")
    if folds < 2:
        raise ConfigError("[regression].folds must be >= 2")

    tru_raw = _section(raw, "truncation", ("levels", "mode"))
    levels = tuple(float(v) for v in tru_raw.get("levels", DEFAULT_LEVELS))
    sweep_mode = str(tru_raw.get("mode", "both"))
    if sweep_mode not in SWEEP_MODES:
        raise ConfigError(f"[truncation].mode must be one of {SWEEP_MODES}")
    if not levels or any(not (0 < v <= 100) for v in levels) or any(
        b <= a for a, b in zip(levels, levels[1:])
    ):
        raise ConfigError("[truncation].levels must be strictly increasing values in (0, 100]")

    lc_raw = _section(raw, "learning_curve", ("sizes", "test_size"))
    lc_sizes: tuple[int, ...] | None = None
    lc_test_size: int | None = None
    if lc_raw:
        if "sizes" not in lc_raw or "test_size" not in lc_raw:
            raise ConfigError("[learning_curve] needs 'sizes' and 'test_size'")
        lc_sizes = tuple(int(v) for v in lc_raw["sizes"])
        lc_test_size = int(lc_raw["test_size"])

    cache_raw = _section(raw, "cache", ("gram",))
    cache_gram = (base / str(cache_raw["gram"])).resolve() if "gram" in cache_raw else None

    return RunConfig(
        representation=rep,
        kernel=kernel,
        targets_path=targets_path,
        properties=properties,
        n_train=n_train,
        n_test=n_test,
        seeds=seeds,
        lambda_grid=lambda_grid,
        folds=folds,
        standardize=standardize,
        levels=levels,
        sweep_mode=sweep_mode,
        lc_sizes=lc_sizes,
        lc_test_size=lc_test_size,
        cache_gram=cache_gram,
    )


def _check_kind_kernel(kind: str, kernel: KernelConfig) -> None:
    if kind == "local" and not kernel.local:
        raise ConfigError("a 'local' representation requires [kernel].local = true")
    if kind != "local" and kernel.local:
        raise ConfigError("[kernel].local = true requires a 'local' representation")
    if kind == "fingerprint" and kernel.family not in FINGERPRINT_FAMILIES:
        raise ConfigError(f"fingerprint representations need a family in {FINGERPRINT_FAMILIES}")
    if kind == "feature" and kernel.family not in ISO_FAMILIES:
        raise ConfigError(f"feature representations need a family in {ISO_FAMILIES}")


def _load_dataset(rep: RepresentationSpec):
    if rep.kind == "fingerprint":
        return dataset_io.read_fingerprints(rep.path)
    if rep.kind == "feature":
        return dataset_io.read_features(rep.path)
    return dataset_io.read_local_envs(rep.path)


def _load_targets(cfg: RunConfig) -> TargetTable:
    if cfg.targets_path is None:
        raise ConfigError("this subcommand needs a [targets] section")
    table = dataset_io.read_targets(cfg.targets_path)
    if cfg.properties is not None:
        for prop in cfg.properties:
            if prop not in table.properties:
                raise ConfigError(f"property {prop!r} is not a column of {cfg.targets_path}")
    return table


def _resolved_properties(cfg: RunConfig, table: TargetTable) -> tuple[str, ...]:
    return cfg.properties if cfg.properties is not None else table.properties


# ---------------------------------------------------------------------------
# Output helpers (all byte-deterministic)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sanitize_json(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_spectrum_csv(path: Path, mu: np.ndarray) -> None:
    _write_csv(path, ("index", "eigenvalue"), [(i + 1, float(v)) for i, v in enumerate(mu)])


def _fit_report_dict(report: FitReport) -> dict:
    return {
        "lambda": report.lambda_selected,
        "r2": report.r2,
        "mae": report.mae,
        "cv": [[lam, mean] for lam, mean in report.cv_table],
        "seed": report.seed,
    }


def _run_dir(args, cfg: RunConfig, experiment: str) -> Path:
    out = Path(args.out_dir) / experiment / cfg.run_label
    out.mkdir(parents=True, exist_ok=True)
    return out


def _announce(paths: Sequence[Path]) -> None:
    for p in sorted(paths):
        print(f"wrote {p}")


# ---------------------------------------------------------------------------
# Shared pipeline steps


def _single_split(cfg: RunConfig, dataset) -> SplitSpec:
    return make_split(dataset.ids, cfg.n_train, cfg.n_test, cfg.seeds[0])


def _train_gram(cfg: RunConfig, dataset, split: SplitSpec, jobs: int | None) -> KernelMatrix:
    train_ds = dataset.subset(split.train_ids)
    if cfg.cache_gram is not None and cfg.cache_gram.is_file():
        values, _ = read_gram_cache(cfg.cache_gram, cfg.kernel)
        if values.shape[0] != len(split.train_ids):
            raise ValidationError(
                f"Gram cache holds n={values.shape[0]} but the split has {len(split.train_ids)} training points"
            )
        log.info("reusing Gram cache %s", cfg.cache_gram)
        return KernelMatrix(values, cfg.kernel, split.train_ids)
    return gram(train_ds, cfg.kernel, jobs)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_gram(args, cfg: RunConfig) -> None:
    dataset = _load_dataset(cfg.representation)
    split = _single_split(cfg, dataset)
    if args.dry_run:
        _print_plan(cfg, args, {"experiment": "gram", "n": cfg.n_train})
        return
    km = _train_gram(cfg, dataset, split, args.jobs)
    eig = eigendecompose(km)
    out = _run_dir(args, cfg, "gram")
    cache_path = cfg.cache_gram if cfg.cache_gram is not None else out / "gram.kgram"
    write_gram_cache(cache_path, km)
    _write_spectrum_csv(out / "spectrum.csv", eig.mu)
    write_split(out / "split.json", split)
    _announce([cache_path, out / "spectrum.csv", out / "split.json"])


def cmd_metrics(args, cfg: RunConfig) -> None:
    dataset = _load_dataset(cfg.representation)
    split = _single_split(cfg, dataset)
    if args.dry_run:
        _print_plan(cfg, args, {"experiment": "metrics", "n": cfg.n_train})
        return
    km = _train_gram(cfg, dataset, split, args.jobs)
    eig = eigendecompose(km)
    report = spectrum_report(eig.mu)
    payload = {
        "experiment": "metrics",
        "representation": cfg.representation.label,
        "kernel": cfg.kernel_label,
        "seed": split.seed,
        "n": report.n,
        "min_eigenvalue": report.min_eigenvalue,
        "full": vars(report.full),
        "truncated": vars(report.truncated) if report.truncated is not None else None,
    }
    out = _run_dir(args, cfg, "metrics")
    _write_json(out / "report.json", payload)
    _write_spectrum_csv(out / "spectrum.csv", eig.mu)
    _announce([out / "report.json", out / "spectrum.csv"])


def cmd_krr(args, cfg: RunConfig) -> None:
    dataset = _load_dataset(cfg.representation)
    table = _load_targets(cfg)
    props = _resolved_properties(cfg, table)
    if args.dry_run:
        _print_plan(cfg, args, {"experiment": "krr", "properties": list(props), "trials": len(cfg.seeds)})
        return

    per_seed: dict[str, list[FitReport]] = {p: [] for p in props}
    for seed in cfg.seeds:
        split = make_split(dataset.ids, cfg.n_train, cfg.n_test, seed)
        train_ds = dataset.subset(split.train_ids)
        test_ds = dataset.subset(split.test_ids)
        km = gram(train_ds, cfg.kernel, args.jobs)
        kx = cross(train_ds, test_ds, cfg.kernel, args.jobs)
        result = evaluate(
            km,
            kx,
            table,
            properties=props,
            lambda_grid=cfg.lambda_grid,
            folds=cfg.folds,
            trials=1,
            seed=seed,
            standardize=cfg.standardize,
            jobs=args.jobs,
        )
        for pe in result.per_property:
            per_seed[pe.property].append(
                FitReport(pe.lambdas[0], pe.cv_tables[0], seed, pe.r2_trials[0], pe.mae_trials[0])
            )

    prop_payload = {}
    table_rows = []
    r2_means = []
    for prop in props:
        fits = per_seed[prop]
        r2s = np.asarray([f.r2 for f in fits])
        maes = np.asarray([f.mae for f in fits])
        r2_std = float(r2s.std(ddof=1)) if len(fits) > 1 else 0.0
        mae_std = float(maes.std(ddof=1)) if len(fits) > 1 else 0.0
        prop_payload[prop] = {
            "r2_mean": float(r2s.mean()),
            "r2_std": r2_std,
            "mae_mean": float(maes.mean()),
            "mae_std": mae_std,
            "fits": [_fit_report_dict(f) for f in fits],
        }
        r2_means.append(float(r2s.mean()))
        table_rows.append((prop, float(r2s.mean()), r2_std, float(maes.mean()), mae_std))

    payload = {
        "experiment": "krr",
        "representation": cfg.representation.label,
        "kernel": cfg.kernel_label,
        "n_train": cfg.n_train,
        "n_test": cfg.n_test,
        "seeds": list(cfg.seeds),
        "folds": cfg.folds,
        "lambda_grid": list(cfg.lambda_grid),
        "standardize": cfg.standardize,
        "avg_r2": float(np.mean(r2_means)),
        "properties": prop_payload,
    }
    out = _run_dir(args, cfg, "krr")
    _write_json(out / "report.json", payload)
    _write_csv(out / "table.csv", ("property", "r2_mean", "r2_std", "mae_mean", "mae_std"), table_rows)
    _announce([out / "report.json", out / "table.csv"])


def cmd_truncate(args, cfg: RunConfig) -> None:
    dataset = _load_dataset(cfg.representation)
    table = _load_targets(cfg)
    props = _resolved_properties(cfg, table)
    modes = ("regularized", "ridgeless") if cfg.sweep_mode == "both" else (cfg.sweep_mode,)
    if args.dry_run:
        _print_plan(
            cfg,
            args,
            {"experiment": "truncate", "properties": list(props), "levels": list(cfg.levels), "modes": list(modes)},
        )
        return
    split = _single_split(cfg, dataset)
    km = _train_gram(cfg, dataset, split, args.jobs)
    test_ds = dataset.subset(split.test_ids)
    kx = cross(dataset.subset(split.train_ids), test_ds, cfg.kernel, args.jobs)
    eig = eigendecompose(km)

    sweeps = {}
    for mode in modes:
        sweeps[mode] = truncation_sweep(
            eig,
            kx,
            table,
            levels=cfg.levels,
            regularized=(mode == "regularized"),
            lambda_grid=cfg.lambda_grid,
            folds=cfg.folds,
            seed=split.seed,
            properties=props,
            standardize=cfg.standardize,
            jobs=args.jobs,
        )

    # The threshold table follows the tuned sweep when it ran.
    table_mode = "regularized" if "regularized" in sweeps else "ridgeless"
    table_rows = []
    for ps in sweeps[table_mode].per_property:
        table_rows.append(
            (cfg.representation.label, cfg.kernel_label, ps.property, ps.thresholds.pct95, ps.thresholds.pct99)
        )

    curve_rows = []
    for mode in modes:
        sw = sweeps[mode]
        for ps in sw.per_property:
            for level, rank, r2 in zip(sw.levels, sw.ranks, ps.r2_by_level):
                curve_rows.append((ps.property, level, rank, mode, r2))

    payload = {
        "experiment": "truncate",
        "representation": cfg.representation.label,
        "kernel": cfg.kernel_label,
        "seed": split.seed,
        "n_train": cfg.n_train,
        "n_test": cfg.n_test,
        "levels": list(cfg.levels),
        "ranks": list(sweeps[table_mode].ranks),
        "modes": {
            mode: {
                ps.property: {
                    "r2_by_level": list(ps.r2_by_level),
                    "lambda_by_level": list(ps.lambda_by_level),
                    "failed_levels": list(ps.failed_levels),
                    "full_r2": ps.full_r2,
                    "full_lambda": ps.full_lambda,
                    "thresholds": vars(ps.thresholds),
                }
                for ps in sweeps[mode].per_property
            }
            for mode in modes
        },
    }
    out = _run_dir(args, cfg, "truncate")
    _write_json(out / "report.json", payload)
    _write_csv(out / "table.csv", ("representation", "kernel", "property", "pct95", "pct99"), table_rows)
    _write_csv(out / "curves.csv", ("property", "level", "rank", "mode", "r2"), curve_rows)
    _announce([out / "report.json", out / "table.csv", out / "curves.csv"])


def cmd_learning_curve(args, cfg: RunConfig) -> None:
    if cfg.lc_sizes is None or cfg.lc_test_size is None:
        raise ConfigError("this subcommand needs a [learning_curve] section with 'sizes' and 'test_size'")
    dataset = _load_dataset(cfg.representation)
    table = _load_targets(cfg)
    props = _resolved_properties(cfg, table)
    if args.dry_run:
        _print_plan(
            cfg,
            args,
            {
                "experiment": "learning-curve",
                "properties": list(props),
                "sizes": list(cfg.lc_sizes),
                "seeds": list(cfg.seeds),
            },
        )
        return
    result = run_learning_curve(
        dataset,
        cfg.kernel,
        table,
        sizes=cfg.lc_sizes,
        test_size=cfg.lc_test_size,
        seeds=cfg.seeds,
        properties=props,
        lambda_grid=cfg.lambda_grid,
        folds=cfg.folds,
        standardize=cfg.standardize,
        jobs=args.jobs,
    )
    payload = {
        "experiment": "learning-curve",
        "representation": cfg.representation.label,
        "kernel": cfg.kernel_label,
        "sizes": list(result.sizes),
        "seeds": list(result.seeds),
        "test_size": cfg.lc_test_size,
        "properties": {
            prop: {
                "mae_mean": list(result.mae_mean[i]),
                "mae_by_seed": [list(v) for v in result.mae_by_seed[i]],
                "r2_mean": list(result.r2_mean[i]),
            }
            for i, prop in enumerate(result.properties)
        },
    }
    rows = []
    for i, prop in enumerate(result.properties):
        for j, size in enumerate(result.sizes):
            rows.append((prop, size, result.mae_mean[i][j]))
    out = _run_dir(args, cfg, "learning-curve")
    _write_json(out / "report.json", payload)
    _write_csv(out / "table.csv", ("property", "size", "mae_mean"), rows)
    _announce([out / "report.json", out / "table.csv"])


def cmd_correlate(args) -> None:
    grouping = None
    if args.grouping is not None:
        try:
            raw = json.loads(Path(args.grouping).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.grouping}: invalid JSON: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError("grouping file must be a JSON object mapping representation -> group")
        grouping = {str(k): str(v) for k, v in raw.items()}

    def _read_report(path: str, expected: str) -> dict:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
        if payload.get("experiment") != expected:
            raise ValidationError(f"{path} is not a {expected!r} report")
        return payload

    krr_reports: dict[tuple[str, str], dict] = {}
    for path in args.krr:
        payload = _read_report(path, "krr")
        krr_reports[(payload["representation"], payload["kernel"])] = payload
    metric_reports: dict[tuple[str, str], dict] = {}
    for path in args.metrics:
        payload = _read_report(path, "metrics")
        metric_reports[(payload["representation"], payload["kernel"])] = payload

    rows = []
    for key in sorted(set(krr_reports) & set(metric_reports)):
        block = metric_reports[key].get(args.variant)
        if block is None:
            log.warning("%s has no %r metric block; pair %s skipped", key, args.variant, key)
            continue
        rows.append(
            MetricRow(
                representation=key[0],
                kernel=key[1],
                alpha=_nan_if_none(block.get("alpha")),
                sse=_nan_if_none(block.get("sse")),
                intrinsic_dim=_nan_if_none(block.get("intrinsic_dim")),
                stable_rank=_nan_if_none(block.get("stable_rank")),
                avg_r2=_nan_if_none(krr_reports[key].get("avg_r2")),
            )
        )
    missing = sorted(set(krr_reports) ^ set(metric_reports))
    for key in missing:
        log.warning("run %s present in only one report set; skipped", key)

    report = correlate_metrics(rows, grouping)
    out = Path(args.out_dir) / "correlate"
    out.mkdir(parents=True, exist_ok=True)
    corr_rows = []
    for group, entries in report.groups:
        for e in entries:
            corr_rows.append((group, e.metric, e.r, e.ci_low, e.ci_high, e.n_points))
    scatter_rows = [
        (p.group, p.representation, p.kernel, p.metric, p.value, p.avg_r2) for p in report.scatter
    ]
    payload = {
        "experiment": "correlate",
        "variant": args.variant,
        "groups": {
            group: {e.metric: {"r": e.r, "ci_low": e.ci_low, "ci_high": e.ci_high, "n": e.n_points} for e in entries}
            for group, entries in report.groups
        },
        "skipped_groups": list(report.skipped_groups),
        "n_rows": len(rows),
    }
    _write_json(out / "report.json", payload)
    _write_csv(out / "correlation_table.csv", ("group", "metric", "r", "ci_low", "ci_high", "n"), corr_rows)
    _write_csv(
        out / "scatter.csv", ("group", "representation", "kernel", "metric", "value", "avg_r2"), scatter_rows
    )
    _announce([out / "report.json", out / "correlation_table.csv", out / "scatter.csv"])


def _nan_if_none(value) -> float:
    return math.nan if value is None else float(value)


def _print_plan(cfg: RunConfig, args, extra: Mapping[str, Any]) -> None:
    plan = {
        "representation": {
            "path": str(cfg.representation.path),
            "kind": cfg.representation.kind,
            "label": cfg.representation.label,
        },
        "kernel": {
            "family": cfg.kernel.family,
            "sigma_f": cfg.kernel.sigma_f,
            "sigma_l": cfg.kernel.sigma_l,
            "local": cfg.kernel.local,
            "classical": cfg.kernel.classical,
        },
        "split": {"n_train": cfg.n_train, "n_test": cfg.n_test, "seeds": list(cfg.seeds)},
        "lambda_grid": list(cfg.lambda_grid),
        "folds": cfg.folds,
        "jobs": args.jobs,
        "out_dir": str(args.out_dir),
    }
    plan.update(extra)
    print(json.dumps(sanitize_json(plan), sort_keys=True, indent=2))


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="molkern", description=__doc__.split("\n\n")[1])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, needs_config: bool = True) -> None:
        if needs_config:
            p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out-dir", default="results", help="results directory (default: results)")
        p.add_argument("--jobs", type=int, default=default_jobs(), help="worker count (default: logical cores)")
        p.add_argument("--seed", type=int, default=None, help="override the config's split seed list with one seed")
        p.add_argument("--dry-run", action="store_true", help="validate config and print the plan, compute nothing")

    for name, fn in (
        ("gram", cmd_gram),
        ("krr", cmd_krr),
        ("truncate", cmd_truncate),
        ("metrics", cmd_metrics),
        ("learning-curve", cmd_learning_curve),
    ):
        p = sub.add_parser(name)
        add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("correlate")
    p.add_argument("--krr", nargs="+", required=True, help="krr report.json paths")
    p.add_argument("--metrics", nargs="+", required=True, help="metrics report.json paths")
    p.add_argument("--grouping", default=None, help="JSON file mapping representation -> group")
    p.add_argument("--variant", choices=("truncated", "full"), default="truncated")
    p.add_argument("--out-dir", default="results")
    p.add_argument("--jobs", type=int, default=default_jobs())
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(fn=None)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "correlate":
            if args.dry_run:
                print(json.dumps({"experiment": "correlate", "krr": sorted(args.krr), "metrics": sorted(args.metrics)}, sort_keys=True, indent=2))
                return 0
            cmd_correlate(args)
            return 0
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seeds=(args.seed,))
        args.fn(args, cfg)
        return 0
    except (ConfigError, ValidationError, ParseError) as exc:
        log.error("%s", exc)
        return 2
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
