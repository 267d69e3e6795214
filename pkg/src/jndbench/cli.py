"""Command-line front end.

    jndbench metrics --manifest pairs.csv --out DIR [--images ROOT] [--jobs N]
    jndbench eval    --dataset ds.csv --scores s.csv [--scores ...] --out DIR
    jndbench test    --dataset ds.csv --scores s.csv --out DIR [--test mrr|wilcoxon|both]
    jndbench crop    --dataset ds.csv --scores s.csv --out DIR
    jndbench regress --dataset ds.csv --scores s.csv --out DIR
    jndbench synth   --out DIR [--config cfg.json] [--seed N]

Every flag can also come from an environment variable named JNDBENCH_<FLAG>
(e.g. JNDBENCH_ALPHA, JNDBENCH_OUT). Explicit flags win over the environment.
Repeatable flags take os.pathsep-separated lists (``--range`` also accepts commas).

Exit codes: 0 success, 1 evaluation error, 2 I/O or schema error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from jndbench import __version__
from jndbench._io import atomic_write_csv, atomic_write_json, atomic_write_text
from jndbench.criteria import (
    CriteriaError,
    criteria_report,
    oriented,
    plcc,
    pwrc_curve,
    rmse,
    srocc,
)
from jndbench.dataset import (
    DatasetError,
    FidelityRange,
    MetricScoreTable,
    join,
    load_metric_scores_csv,
    load_subjective_csv,
    save_metric_scores_csv,
    save_subjective_csv,
)
from jndbench.imgmetrics import ImageError, compute_all
from jndbench.kernelreg import KernelRegError, linear_trend, residual_curves
from jndbench.stattests import (
    DEFAULT_ALPHA,
    SigTest,
    StatTestError,
    compare_variants,
    significance_matrix,
)
from jndbench.synth import SynthConfig, SynthConfigError, gen_dataset, polarity_config
from jndbench.transform import LogisticParams, TransformError, fit_logistic, transformed

log = logging.getLogger("jndbench")

ENV_PREFIX = "JNDBENCH_"
EXIT_OK, EXIT_EVAL, EXIT_IO = 0, 1, 2
MANIFEST_HEADER = ("stimulus_id", "ref", "dist", "variant")
CRITERIA_COLUMNS = ("metric", "range", "n", "plcc", "srocc", "kt", "rmse", "z_rmse", "llr",
                    "outlier_ratio", "pwrc_auc")

_EVAL_ERRORS = (TransformError, CriteriaError, StatTestError, KernelRegError, FloatingPointError)
_IO_ERRORS = (OSError, DatasetError, ImageError, SynthConfigError, json.JSONDecodeError,
              csv.Error, UnicodeDecodeError)


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, _IO_ERRORS):
        return EXIT_IO
    return EXIT_EVAL


@contextlib.contextmanager
def metric_context(metric: str, what: str = ""):
    """Re-raise library errors with the metric name attached."""
    try:
        yield
    except (_EVAL_ERRORS + _IO_ERRORS) as exc:
        label = f"{metric} ({what})" if what else metric
        raise CliError(f"{label}: {exc}", exit_code_for(exc)) from exc


def fmt(x) -> str:
    """Round-trip float formatting, so identical runs give identical bytes."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


@dataclass
class RunConfig:
    dataset: Path | None = None
    scores: list[Path] = field(default_factory=list)
    polarity: Path | None = None
    images: Path | None = None
    ranges: list[FidelityRange] = field(default_factory=lambda: list(FidelityRange))
    tests: list[SigTest] = field(default_factory=lambda: list(SigTest))
    variant: str = "full"
    metrics: list[str] | None = None
    alpha: float = DEFAULT_ALPHA
    use_paper_threshold: bool = False
    out: Path = Path("out")
    seed: int | None = None

    def __post_init__(self):
        if not self.ranges:
            raise CliError("at least one --range is required", EXIT_IO)
        if not 0 < self.alpha < 1:
            raise CliError(f"--alpha must be in (0, 1), got {self.alpha}", EXIT_IO)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        ranges = []
        for item in getattr(args, "range", None) or ["all", "hf", "mf"]:
            for part in item.split(","):
                if part.strip():
                    try:
                        r = FidelityRange.parse(part.strip())
                    except ValueError as exc:
                        raise CliError(str(exc), EXIT_IO) from None
                    if r not in ranges:
                        ranges.append(r)
        test = getattr(args, "test", "both")
        tests = list(SigTest) if test == "both" else [SigTest(test)]
        return cls(
            dataset=Path(args.dataset) if getattr(args, "dataset", None) else None,
            scores=[Path(p) for p in getattr(args, "scores", None) or []],
            polarity=Path(args.polarity) if getattr(args, "polarity", None) else None,
            images=Path(args.images) if getattr(args, "images", None) else None,
            ranges=ranges,
            tests=tests,
            variant=getattr(args, "variant", "full"),
            metrics=getattr(args, "metrics", None) or None,
            alpha=args.alpha,
            use_paper_threshold=args.paper_threshold,
            out=Path(args.out),
            seed=args.seed,
        )

    def check_out(self) -> None:
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"cannot create output directory {self.out}: {exc}", EXIT_IO) from None
        if not os.access(self.out, os.W_OK):
            raise CliError(f"output directory {self.out} is not writable", EXIT_IO)


# ---------------------------------------------------------------- loading

def load_inputs(cfg: RunConfig):
    if cfg.dataset is None:
        raise CliError("--dataset is required", EXIT_IO)
    if not cfg.scores:
        raise CliError("at least one --scores file is required", EXIT_IO)
    ds = load_subjective_csv(cfg.dataset)
    table = None
    for path in cfg.scores:
        t = load_metric_scores_csv(path, cfg.polarity)
        table = t if table is None else table.merge(t)
    metrics = table.metrics
    if cfg.metrics:
        unknown = [m for m in cfg.metrics if m not in metrics]
        if unknown:
            raise CliError(f"metrics not found in score files: {', '.join(unknown)}", EXIT_IO)
        metrics = list(cfg.metrics)
    log.info("loaded %d stimuli and %d metrics", len(ds), len(metrics))
    return ds, table, metrics


def fit_all(ds, table: MetricScoreTable, metrics, variant: str) -> dict[str, LogisticParams]:
    params = {}
    for m in metrics:
        with metric_context(m, "logistic fit"):
            series = join(ds, table, m, variant)
            params[m] = fit_logistic(series.scores, series.jnd_mean)
    return params


def params_json(params: dict[str, LogisticParams], variant: str) -> list[dict]:
    return [p.to_json(m, variant) for m, p in params.items()]


# ---------------------------------------------------------------- metrics

def _resolve(path: str, root: Path | None) -> Path:
    p = Path(path)
    return p if p.is_absolute() or root is None else root / p


def read_manifest(path: Path, root: Path | None) -> list[tuple[str, Path, Path, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MANIFEST_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise CliError(f"{path}: missing manifest column(s) {', '.join(missing)}", EXIT_IO)
        pairs = []
        for row in reader:
            variant = (row["variant"] or "full").strip()
            if variant not in ("full", "crop"):
                raise CliError(f"{path}: bad variant {variant!r} for {row['stimulus_id']}", EXIT_IO)
            pairs.append((row["stimulus_id"].strip(), _resolve(row["ref"].strip(), root),
                          _resolve(row["dist"].strip(), root), variant))
    if not pairs:
        raise CliError(f"{path}: manifest has no pairs", EXIT_IO)
    return pairs


def _compute_pair(pair):
    sid, ref, dist, variant = pair
    try:
        return sid, variant, compute_all(ref, dist), None
    except (ImageError, OSError, ValueError) as exc:
        return sid, variant, None, f"{type(exc).__name__}: {exc}"


def cmd_metrics(args, cfg: RunConfig) -> int:
    if not args.manifest:
        raise CliError("--manifest is required", EXIT_IO)
    pairs = read_manifest(Path(args.manifest), cfg.images)
    missing = [f"{sid}: {p}" for sid, ref, dist, _ in pairs for p in (ref, dist) if not p.is_file()]
    if missing:
        for line in missing:
            print(f"missing file: {line}", file=sys.stderr)
        raise CliError(f"{len(missing)} image file(s) not found; nothing written", EXIT_IO)
    cfg.check_out()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compute_pair, pairs))  # map keeps manifest order
    else:
        results = [_compute_pair(p) for p in pairs]
    rows, errors = [], []
    for sid, variant, values, err in results:
        if err:
            errors.append(f"{sid} ({variant}): {err}")
            continue
        rows.extend((name, variant, sid, fmt(v)) for name, v in values)
    out = cfg.out / "scores.csv"
    if rows:
        atomic_write_csv(out, ("metric", "variant", "stimulus_id", "score"), rows)
        log.info("wrote %d rows to %s", len(rows), out)
    if errors:
        for line in errors:
            print(f"pair failed: {line}", file=sys.stderr)
        raise CliError(f"{len(errors)} of {len(pairs)} pair(s) failed", EXIT_EVAL)
    return EXIT_OK


# ---------------------------------------------------------------- eval

def cmd_eval(args, cfg: RunConfig) -> int:
    ds, table, metrics = load_inputs(cfg)
    cfg.check_out()
    params = fit_all(ds, table, metrics, cfg.variant)
    reports = {}
    for m in metrics:
        for r in dict.fromkeys([FidelityRange.ALL, *cfg.ranges]):
            with metric_context(m, r.label):
                reports[(m, r)] = criteria_report(ds, table, m, cfg.variant, r, params[m])
    # Table layout: lowest to highest All-range SROCC.
    order = sorted(metrics, key=lambda m: (reports[(m, FidelityRange.ALL)].srocc, m))
    rows = []
    for m in order:
        for r in cfg.ranges:
            d = reports[(m, r)].as_dict()
            rows.append([d["metric"], d["range"]] + [fmt(d[c]) for c in CRITERIA_COLUMNS[2:]])
    atomic_write_csv(cfg.out / "criteria.csv", CRITERIA_COLUMNS, rows)
    atomic_write_json(cfg.out / "params.json", params_json(params, cfg.variant))
    target = ds.jnd_mean
    for m in order:
        pred = transformed(params[m], join(ds, table, m, cfg.variant).scores)
        for r in cfg.ranges:
            mask = np.array([r.contains(v) for v in target])
            with metric_context(m, f"PWRC {r.label}"):
                curve = pwrc_curve(pred[mask], target[mask])
            atomic_write_csv(
                cfg.out / "pwrc" / f"{safe_name(m)}_{r.value}.csv",
                ("threshold", "sa"),
                ((fmt(t), fmt(s)) for t, s in zip(curve.thresholds, curve.sa)),
            )
    print(f"{len(rows)} criteria rows -> {cfg.out / 'criteria.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------- test

def matrix_rows(mat):
    for name, row in zip(mat.metrics, mat.cells):
        yield [name] + [str(int(v)) for v in row]


def cmd_test(args, cfg: RunConfig) -> int:
    ds, table, metrics = load_inputs(cfg)
    if len(metrics) < 2:
        raise CliError("significance testing needs at least 2 metrics", EXIT_IO)
    cfg.check_out()
    params = fit_all(ds, table, metrics, cfg.variant)
    for r in cfg.ranges:
        for test in cfg.tests:
            with metric_context(",".join(metrics), f"{test.value} {r.label}"):
                mat = significance_matrix(ds, table, metrics, test, cfg.variant, cfg.alpha,
                                          cfg.use_paper_threshold, r, params)
            # SignificanceMatrix validates antisymmetry on construction.
            stem = cfg.out / f"significance_{test.value}_{r.value}"
            atomic_write_csv(stem.with_suffix(".csv"), ["metric"] + mat.metrics, matrix_rows(mat))
            meta = mat.to_json()
            meta.update(range=r.label, alpha=cfg.alpha, paper_threshold=cfg.use_paper_threshold,
                        variant=cfg.variant)
            atomic_write_json(stem.with_suffix(".json"), meta)
            atomic_write_text(stem.with_suffix(".txt"), mat.render())
            print(f"{test.value} ({r.label}) -> {stem.with_suffix('.txt')}")
            print(mat.render(), end="")
    return EXIT_OK


# ---------------------------------------------------------------- crop

CROP_COLUMNS = (
    "metric", "B1", "B2", "B3", "B4",
    "mrr_z", "mrr_p", "mrr_decision",
    "wilcoxon_z", "wilcoxon_p", "wilcoxon_decision",
    "plcc_full", "srocc_full", "rmse_full", "plcc_crop", "srocc_crop", "rmse_crop",
)


def cmd_crop(args, cfg: RunConfig) -> int:
    ds, table, metrics = load_inputs(cfg)
    both = [m for m in metrics if {"full", "crop"} <= set(table.variants(m))]
    if not both:
        raise CliError("no metric has both 'full' and 'crop' scores", EXIT_IO)
    skipped = [m for m in metrics if m not in both]
    if skipped:
        log.warning("skipping metrics without both variants: %s", ", ".join(skipped))
    cfg.check_out()
    rows, details = [], []
    target = ds.jnd_mean
    n_same = 0
    for m in both:
        with metric_context(m, "crop vs full"):
            cmp = compare_variants(ds, table, m, cfg.alpha, cfg.use_paper_threshold)
        p = cmp.params
        row = [m, fmt(p.b1), fmt(p.b2), fmt(p.b3), fmt(p.b4),
               fmt(cmp.mrr.z_stat), fmt(cmp.mrr.p_value), str(cmp.mrr.decision),
               fmt(cmp.wilcoxon.z_stat), fmt(cmp.wilcoxon.p_value), str(cmp.wilcoxon.decision)]
        entry = {"metric": m, "params": p.to_json(m, "full+crop"),
                 "mrr": cmp.mrr.__dict__, "wilcoxon": cmp.wilcoxon.__dict__}
        if cmp.mrr.decision or cmp.wilcoxon.decision:
            per_variant = {}
            for variant in ("full", "crop"):
                s = join(ds, table, m, variant).scores
                pred = transformed(p, s)
                with metric_context(m, f"{variant} criteria"):
                    per_variant[variant] = {
                        "plcc": plcc(pred, target),
                        "srocc": srocc(oriented(s, table.polarity[m]), target),
                        "rmse": rmse(pred, target),
                    }
            row += [fmt(per_variant[v][k]) for v in ("full", "crop") for k in ("plcc", "srocc", "rmse")]
            entry["criteria"] = per_variant
        else:
            n_same += 1
            row += [""] * 6
        rows.append(row)
        details.append(entry)
    atomic_write_csv(cfg.out / "crop_report.csv", CROP_COLUMNS, rows)
    atomic_write_json(cfg.out / "crop_report.json",
                      {"alpha": cfg.alpha, "paper_threshold": cfg.use_paper_threshold,
                       "metrics": details})
    print(f"{n_same}/{len(both)} metrics show no significant crop/full difference")
    return EXIT_OK


# ---------------------------------------------------------------- regress

def cmd_regress(args, cfg: RunConfig) -> int:
    ds, table, metrics = load_inputs(cfg)
    cfg.check_out()
    params = fit_all(ds, table, metrics, cfg.variant)
    bandwidths = {}
    for m in metrics:
        pred = transformed(params[m], join(ds, table, m, cfg.variant).scores)
        with metric_context(m, "kernel regression"):
            curves = residual_curves(ds.jnd_mean, pred, ds.jnd_std)
        info = {}
        for kind, curve in curves.items():
            atomic_write_csv(cfg.out / "curves" / f"{safe_name(m)}_{kind}.csv",
                             ("grid_x", "estimate_y", "defined"),
                             ((fmt(x), "" if y == "" else fmt(y), ok) for x, y, ok in curve.rows()))
            with metric_context(m, f"{kind} trend"):
                info[kind] = {"bandwidth": curve.bandwidth, "trend": linear_trend(curve)}
        bandwidths[m] = info
    atomic_write_json(cfg.out / "bandwidths.json", bandwidths)
    print(f"{2 * len(metrics)} curves -> {cfg.out / 'curves'}")
    return EXIT_OK


# ---------------------------------------------------------------- synth

def cmd_synth(args, cfg: RunConfig) -> int:
    conf = SynthConfig.from_json(args.config) if args.config else SynthConfig()
    if cfg.seed is not None:
        conf = SynthConfig.from_dict({**conf.to_dict(), "seed": cfg.seed})
    ds, table = gen_dataset(conf)
    cfg.check_out()
    save_subjective_csv(ds, cfg.out / "dataset.csv")
    save_metric_scores_csv(table, cfg.out / "scores.csv")
    atomic_write_json(cfg.out / "polarity.json", polarity_config(table))
    atomic_write_json(cfg.out / "meta.json",
                      {"seed": conf.seed, "n_stimuli": len(ds), "version": __version__,
                       "config": conf.to_dict()})
    print(f"{len(ds)} stimuli, {len(table.metrics)} metrics (seed {conf.seed}) -> {cfg.out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def _env_list(name: str):
    raw = _env(name)
    if raw is None:
        return None
    return [p for p in raw.split(os.pathsep) if p]


def _env_bool(name: str) -> bool:
    return str(_env(name, "")).lower() in ("1", "true", "yes", "on")


def _env_number(name: str, kind, default):
    raw = _env(name)
    if raw is None:
        return default
    try:
        return kind(raw)
    except ValueError:
        raise CliError(f"{ENV_PREFIX}{name.upper()}={raw!r} is not a valid {kind.__name__}",
                       EXIT_IO) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=_env("out", "out"), help="output directory")
    common.add_argument("--alpha", type=float, default=_env_number("alpha", float, DEFAULT_ALPHA))
    common.add_argument("--paper-threshold", action="store_true", default=_env_bool("paper_threshold"),
                        help="Wilcoxon: compare p against the effect size |r| instead of alpha")
    common.add_argument("--seed", type=int, default=_env_number("seed", int, None))
    common.add_argument("-v", "--verbose", action="count", default=0)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--dataset", default=_env("dataset"), help="subjective CSV")
    data.add_argument("--scores", action="append", default=None,
                      help="metric-score CSV (repeatable)")
    data.add_argument("--polarity", default=_env("polarity"),
                      help="JSON map metric -> higher|lower for non-built-in metrics")
    data.add_argument("--range", action="append", default=None,
                      help="fidelity range all|hf|mf (repeatable; default all three)")
    data.add_argument("--variant", choices=("full", "crop"), default=_env("variant", "full"))
    data.add_argument("--metrics", nargs="+", default=None, help="restrict to these metrics")

    p = argparse.ArgumentParser(prog="jndbench", description="JND-scale metric benchmarking harness")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("metrics", parents=[common], help="compute native metrics for image pairs")
    m.add_argument("--manifest", default=_env("manifest"),
                   help="CSV with stimulus_id,ref,dist,variant")
    m.add_argument("--images", default=_env("images"), help="root for relative manifest paths")
    m.add_argument("--jobs", type=int, default=_env_number("jobs", int, 1))
    m.set_defaults(func=cmd_metrics)

    e = sub.add_parser("eval", parents=[common, data], help="criteria tables and fitted params")
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("test", parents=[common, data], help="pairwise significance matrices")
    t.add_argument("--test", choices=("mrr", "wilcoxon", "both"), default=_env("test", "both"))
    t.set_defaults(func=cmd_test)

    c = sub.add_parser("crop", parents=[common, data], help="cropped vs full-resolution comparison")
    c.set_defaults(func=cmd_crop)

    r = sub.add_parser("regress", parents=[common, data], help="residual-vs-JND kernel regression")
    r.set_defaults(func=cmd_regress)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("--config", default=_env("config"), help="synthetic config JSON")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        parser = build_parser()
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "scores", "unset") is None:
        args.scores = _env_list("scores")
    if getattr(args, "range", "unset") is None:
        env_range = _env("range")
        args.range = env_range.split(",") if env_range else None
    if getattr(args, "metrics", "unset") is None:
        args.metrics = _env_list("metrics")
    try:
        cfg = RunConfig.from_args(args)
        with np.errstate(all="ignore"):
            return args.func(args, cfg)
    except Exception as exc:
        if not isinstance(exc, (CliError,) + _EVAL_ERRORS + _IO_ERRORS):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
