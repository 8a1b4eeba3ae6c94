"""Command-line pipeline: synth, clean, tune, train, impute, density,
validate, sensitivity.

Every subcommand reads flat files, writes flat files plus a run manifest, and
is individually re-runnable. Outputs are deterministic for a fixed seed and
independent of --threads; manifest timings are the one exception and are
excluded from byte-identity comparisons.

Exit codes: 0 success, 2 usage or schema errors, 3 data errors, 4 internal
invariant violations.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import (
    DEFAULT_HDV_PARAMS,
    DEFAULT_MDV_PARAMS,
    Hyperparameters,
    ValidationError,
    VehicleClass,
)
from .density import compute_density, write_density
from .figures import (
    save_county_mape_figure,
    save_predictor_summary_figure,
    save_residual_figure,
    save_sensitivity_figure,
)
from .forest import ForestModel, fit_forest, predict
from .impute import read_imputed_csv, run_imputation, train_models, write_imputed_csv
from .ingest import (
    IngestError,
    assign_counties,
    clean_links,
    parse_blocks,
    parse_links,
    parse_polygons_csv,
    reclassify_urban,
    write_links_csv,
)
from .synth import SynthConfig, generate_corpus, write_corpus
from .tune import SearchSpace, bayes_search, trial_log_rows
from .validate import (
    NoiseTarget,
    county_weighted_mape,
    kfold_cv,
    predictor_summary,
    residual_analysis,
    score,
    sensitivity,
    train_test_split,
)


class InvariantError(RuntimeError):
    """An internal consistency check failed; maps to exit code 4."""


@dataclass
class RunConfig:
    """Pipeline settings; defaults reproduce the documented reference run:
    250 m buffer, 48-iteration 3-fold tuning, 80/20 split, 5-fold CV."""

    links: str = ""
    blocks: str = ""
    counties: str = ""
    urban_areas: str = ""
    out_dir: str = "out"
    seed: int = 0
    threads: int = 0  # 0 = all available cores
    buffer_m: float = 250.0
    arc_segments: int = 16
    mdv_params: Hyperparameters = field(default_factory=lambda: DEFAULT_MDV_PARAMS)
    hdv_params: Hyperparameters = field(default_factory=lambda: DEFAULT_HDV_PARAMS)
    tune_n_iter: int = 48
    tune_folds: int = 3
    tune_sample_frac: float = 1.0
    test_frac: float = 0.2
    cv_folds: int = 5
    lowess_frac: float = 2.0 / 3.0
    noise_levels: tuple = (0.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0)

    def effective_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


def params_to_dict(p: Hyperparameters) -> dict:
    return {
        "n_estimators": p.n_estimators,
        "max_depth": p.max_depth,
        "min_samples_split": p.min_samples_split,
        "min_samples_leaf": p.min_samples_leaf,
        "max_features": p.max_features,
    }


def params_from_dict(d: dict) -> Hyperparameters:
    mf = d.get("max_features", "all")
    if isinstance(mf, str) and mf not in ("all", "sqrt"):
        mf = float(mf)
    return Hyperparameters(
        n_estimators=int(d["n_estimators"]),
        max_depth=None if d.get("max_depth") in (None, "", "none") else int(d["max_depth"]),
        min_samples_split=int(d.get("min_samples_split", 2)),
        min_samples_leaf=int(d.get("min_samples_leaf", 1)),
        max_features=mf,
    )


def load_config(path: str | Path) -> RunConfig:
    """key = value sections; anything absent keeps its default."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise IngestError(f"config file not found: {path}")
    cfg = RunConfig()
    if cp.has_section("paths"):
        for key in ("links", "blocks", "counties", "urban_areas", "out_dir"):
            if cp.has_option("paths", key):
                setattr(cfg, key, cp.get("paths", key))
    if cp.has_section("run"):
        g = cp["run"]
        cfg.seed = g.getint("seed", cfg.seed)
        cfg.threads = g.getint("threads", cfg.threads)
        cfg.buffer_m = g.getfloat("buffer_m", cfg.buffer_m)
        cfg.arc_segments = g.getint("arc_segments", cfg.arc_segments)
    for section, attr in (("model.mdv", "mdv_params"), ("model.hdv", "hdv_params")):
        if cp.has_section(section):
            base = params_to_dict(getattr(cfg, attr))
            for key in base:
                if cp.has_option(section, key):
                    base[key] = cp.get(section, key)
            if base["max_depth"] in ("", "none", "None"):
                base["max_depth"] = None
            setattr(cfg, attr, params_from_dict(base))
    if cp.has_section("tuning"):
        t = cp["tuning"]
        cfg.tune_n_iter = t.getint("n_iter", cfg.tune_n_iter)
        cfg.tune_folds = t.getint("folds", cfg.tune_folds)
        cfg.tune_sample_frac = t.getfloat("sample_frac", cfg.tune_sample_frac)
    if cp.has_section("validation"):
        v = cp["validation"]
        cfg.test_frac = v.getfloat("test_frac", cfg.test_frac)
        cfg.cv_folds = v.getint("cv_folds", cfg.cv_folds)
        cfg.lowess_frac = v.getfloat("lowess_frac", cfg.lowess_frac)
        if v.get("noise_levels", ""):
            cfg.noise_levels = tuple(
                float(x) for x in v.get("noise_levels").split(","))
    return cfg


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, cfg: RunConfig,
                   inputs: Sequence[Path], outputs: Sequence[Path],
                   t0: float) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "threads": cfg.effective_threads(),
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": sorted(str(p) for p in outputs),
        "seconds": round(time.perf_counter() - t0, 3),
    }
    path = out_dir / f"manifest_{command}.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_clean_links(path: str | Path):
    """Parse + re-clean a links file. On an already-cleaned file this is a
    no-op pass (cleaning is idempotent); any drops mean the file was not
    actually clean and are surfaced."""
    candidates, errors = parse_links(path)
    if errors:
        msgs = "; ".join(f"line {e.line_no}: {e.message}" for e in errors[:5])
        raise IngestError(f"{path}: {len(errors)} unparseable rows ({msgs} ...)")
    links, report = clean_links(candidates)
    return links, report


# ---------------------------------------------------------------- commands


def cmd_synth(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = SynthConfig(
        n_links=args.n, seed=cfg.seed, n_states=args.states,
        counties_per_state=args.counties_per_state,
        noise_pct=args.noise_pct, missing_frac=args.missing_frac,
        single_missing_frac=args.single_missing_frac,
        block_grid=args.block_grid,
        functional_class_7_frac=args.fc7_frac,
    )
    links, blocks, truth = generate_corpus(sc)
    paths = write_corpus(links, blocks, truth, out)
    write_manifest(out, "synth", cfg, [], list(paths.values()), t0)
    print(f"synth: {len(links)} links, {len(blocks)} blocks -> {out}")
    return 0


def cmd_clean(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = [Path(cfg.links)]
    candidates, errors = parse_links(cfg.links)
    links, report = clean_links(candidates)
    if cfg.counties:
        inputs.append(Path(cfg.counties))
        county_polys = parse_polygons_csv(cfg.counties, "fips")
        links, unmatched = assign_counties(links, county_polys)
        if unmatched:
            print(f"clean: {len(unmatched)} links outside all counties",
                  file=sys.stderr)
    if cfg.urban_areas:
        inputs.append(Path(cfg.urban_areas))
        urban_polys = parse_polygons_csv(cfg.urban_areas, "kind")
        links, changed = reclassify_urban(links, urban_polys)
        report.urban_code_changed = changed
    if not report.reconciles():
        raise InvariantError("cleaning report counters do not reconcile")
    links_path = out / "links_clean.csv"
    write_links_csv(links, links_path)
    report_path = out / "cleaning_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True),
                           encoding="utf-8")
    outputs = [links_path, report_path]
    if errors:
        err_path = write_csv(out / "row_errors.csv", ["line_no", "message"],
                             [(e.line_no, e.message) for e in errors])
        outputs.append(err_path)
        print(f"clean: {len(errors)} unparseable rows reported", file=sys.stderr)
    write_manifest(out, "clean", cfg, inputs, outputs, t0)
    print(f"clean: kept {report.rows_kept}/{report.rows_read} rows "
          f"(dropped {report.dropped_total()}, lanes defaulted "
          f"{report.lanes_defaulted}, urban changed {report.urban_code_changed})")
    return 0


def _target(name: str) -> VehicleClass:
    return VehicleClass.MDV if name == "mdv" else VehicleClass.HDV


def cmd_tune(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    links, _ = load_clean_links(cfg.links)
    target = _target(args.target)
    observed = [l for l in links
                if l.aadt(target) is not None and l.functional_class <= 6]
    if not observed:
        raise ValueError(f"no observed {args.target} AADT to tune on")
    best, log = bayes_search(
        observed, target, SearchSpace(), n_iter=cfg.tune_n_iter,
        folds=cfg.tune_folds, seed=cfg.seed,
        sample_frac=cfg.tune_sample_frac, threads=cfg.effective_threads(),
    )
    rows = trial_log_rows(log)
    trials_path = write_csv(
        out / f"tuning_trials_{args.target}.csv",
        list(rows[0].keys()), [[_fmt(v) for v in r.values()] for r in rows])
    best_path = out / f"best_params_{args.target}.json"
    best_path.write_text(json.dumps(params_to_dict(best), indent=2, sort_keys=True),
                         encoding="utf-8")
    write_manifest(out, "tune", cfg, [Path(cfg.links)], [trials_path, best_path], t0)
    print(f"tune[{args.target}]: best mean CV RMSE "
          f"{log.best().mean_rmse:.4f} after {len(log)} trials")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    links, _ = load_clean_links(cfg.links)
    models = train_models(links, cfg.mdv_params, cfg.hdv_params, cfg.seed,
                          threads=cfg.effective_threads())
    outputs = []
    for target, model in models.items():
        path = out / f"model_{target.value}.json"
        path.write_text(model.to_json(), encoding="utf-8")
        outputs.append(path)
        print(f"train[{target.value}]: {len(model.trees)} trees on "
              f"{model.trees[0].n[0]} samples -> {path.name}")
    write_manifest(out, "train", cfg, [Path(cfg.links)], outputs, t0)
    return 0


def cmd_impute(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    links, _ = load_clean_links(cfg.links)
    inputs = [Path(cfg.links)]
    models = None
    if args.mdv_model and args.hdv_model:
        models = {
            VehicleClass.MDV: ForestModel.from_json(
                Path(args.mdv_model).read_text(encoding="utf-8")),
            VehicleClass.HDV: ForestModel.from_json(
                Path(args.hdv_model).read_text(encoding="utf-8")),
        }
        inputs += [Path(args.mdv_model), Path(args.hdv_model)]
    result = run_imputation(links, cfg.mdv_params, cfg.hdv_params, cfg.seed,
                            models=models, threads=cfg.effective_threads())
    for link in result.links:
        if link.functional_class <= 6:
            total = link.aadt_ldv + link.aadt_mdv + link.aadt_hdv
            if abs(total - link.aadt_total) > 1e-6 * max(link.aadt_total, 1.0):
                raise InvariantError(
                    f"class sum != total on link {link.link_id}")
    imputed_path = out / "links_imputed.csv"
    write_imputed_csv(result, imputed_path)
    stats_path = out / "imputation_stats.json"
    stats_path.write_text(json.dumps(result.stats.to_dict(), indent=2,
                                     sort_keys=True), encoding="utf-8")
    write_manifest(out, "impute", cfg, inputs, [imputed_path, stats_path], t0)
    print(f"impute: predicted mdv={result.stats.predicted_mdv} "
          f"hdv={result.stats.predicted_hdv}, rescaled={result.stats.rescaled}")
    return 0


def cmd_density(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    links = read_imputed_csv(cfg.links)
    blocks, block_errors = parse_blocks(cfg.blocks)
    if block_errors:
        print(f"density: {len(block_errors)} bad block rows skipped",
              file=sys.stderr)
    results, report = compute_density(
        blocks, links, buffer_m=cfg.buffer_m, arc_segments=cfg.arc_segments)
    density_path = out / "density.csv"
    write_density(results, density_path)
    report_path = out / "density_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True),
                           encoding="utf-8")
    write_manifest(out, "density", cfg, [Path(cfg.links), Path(cfg.blocks)],
                   [density_path, report_path], t0)
    print(f"density: {report.blocks_out}/{report.blocks_in} blocks, "
          f"{report.links_usable} usable links")
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    links, _ = load_clean_links(cfg.links)
    threads = cfg.effective_threads()
    outputs = []
    summary: dict = {}
    for target, params in ((VehicleClass.MDV, cfg.mdv_params),
                           (VehicleClass.HDV, cfg.hdv_params)):
        name = target.value
        observed = [l for l in links
                    if l.aadt(target) is not None and l.functional_class <= 6]
        if len(observed) < 10:
            raise ValueError(f"too few observed {name} links to validate")
        train, test = train_test_split(observed, cfg.test_frac, cfg.seed)
        model = fit_forest(train, target, params, seed=cfg.seed, threads=threads)
        preds = predict(model, test)
        y_test = np.array([l.aadt(target) for l in test])
        metrics = score(y_test, preds)
        summary[name] = {
            "r2": metrics.r2, "mae": metrics.mae, "rmse": metrics.rmse,
            "mape": metrics.mape, "n_test": metrics.n, "n_train": len(train),
        }

        resid = residual_analysis(test, preds, target, frac=cfg.lowess_frac)
        outputs.append(write_csv(
            out / f"residuals_{name}.csv",
            ["observed", "residual", "lowess_fit"],
            [[_fmt(a), _fmt(b), _fmt(c)] for a, b, c in resid]))
        outputs.append(save_residual_figure(
            resid, out / f"residuals_{name}.png", name.upper()))

        mape_result = county_weighted_mape(test, preds, target)
        outputs.append(write_csv(
            out / f"county_mape_{name}.csv",
            ["county_fips", "mape_pct", "total_vkt", "n_links"],
            [[c.county_fips, _fmt(c.mape_pct), _fmt(c.total_vkt), c.n_links]
             for c in mape_result.counties]))
        outputs.append(save_county_mape_figure(
            mape_result.counties, out / f"county_mape_{name}.png", name.upper()))
        summary[name]["county_mape_mean"] = (
            float(np.mean([c.mape_pct for c in mape_result.counties]))
            if mape_result.counties else None)
        summary[name]["zero_observed_excluded"] = mape_result.zero_observed_excluded

        buckets = predictor_summary(test, preds, target)
        outputs.append(write_csv(
            out / f"predictor_summary_{name}.csv",
            ["predictor", "bucket", "series", "min", "q1", "median", "q3",
             "max", "n"],
            [[r.predictor, r.bucket, r.series, _fmt(r.q_min), _fmt(r.q1),
              _fmt(r.median), _fmt(r.q3), _fmt(r.q_max), r.n] for r in buckets]))
        outputs.append(save_predictor_summary_figure(
            buckets, out / f"predictor_summary_{name}.png", name.upper()))

        if cfg.cv_folds >= 2:
            cv = kfold_cv(observed, target, params, k=cfg.cv_folds,
                          seed=cfg.seed, threads=threads)
            outputs.append(write_csv(
                out / f"cv_folds_{name}.csv",
                ["fold", "r2", "mae", "rmse", "mape", "n"],
                [[i, _fmt(m.r2), _fmt(m.mae), _fmt(m.rmse),
                  "" if m.mape is None else _fmt(m.mape), m.n]
                 for i, m in enumerate(cv.fold_metrics)]))
            summary[name]["cv_mean"] = cv.mean
            summary[name]["cv_variance"] = cv.variance
    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(summary, indent=2, sort_keys=True),
                            encoding="utf-8")
    outputs.append(metrics_path)
    write_manifest(out, "validate", cfg, [Path(cfg.links)], outputs, t0)
    for name in summary:
        print(f"validate[{name}]: R2={summary[name]['r2']:.4f} "
              f"MAE={summary[name]['mae']:.2f} RMSE={summary[name]['rmse']:.2f}")
    return 0


def cmd_sensitivity(cfg: RunConfig, args) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    links, _ = load_clean_links(cfg.links)
    threads = cfg.effective_threads()
    noise_targets = {
        "predictor": [NoiseTarget.PREDICTOR],
        "response": [NoiseTarget.RESPONSE],
        "both": [NoiseTarget.PREDICTOR, NoiseTarget.RESPONSE],
    }[args.noise_target]
    rows = []
    curves = []
    for target, params in ((VehicleClass.MDV, cfg.mdv_params),
                           (VehicleClass.HDV, cfg.hdv_params)):
        observed = [l for l in links
                    if l.aadt(target) is not None and l.functional_class <= 6]
        if len(observed) < 10:
            raise ValueError(f"too few observed {target.value} links")
        for nt in noise_targets:
            curve = sensitivity(
                observed, target, params, nt, levels=cfg.noise_levels,
                seed=cfg.seed, test_frac=cfg.test_frac, threads=threads)
            curves.append((f"{target.value} / {nt.value} noise", curve))
            for pct, r2 in curve.levels:
                rows.append([target.value, nt.value, _fmt(pct), _fmt(r2)])
    csv_path = write_csv(out / "sensitivity.csv",
                         ["target", "noise_target", "noise_pct", "r2"], rows)
    fig_path = save_sensitivity_figure(curves, out / "sensitivity.png")
    write_manifest(out, "sensitivity", cfg, [Path(cfg.links)],
                   [csv_path, fig_path], t0)
    print(f"sensitivity: {len(rows)} curve points -> {csv_path.name}")
    return 0


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trucktraffic",
        description="Fill missing truck AADT on road links and aggregate "
                    "per-class traffic density to census blocks.")
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="root RNG seed")
    parser.add_argument("--threads", type=int,
                        help="parallelism cap (results never depend on it)")
    parser.add_argument("--out-dir", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--counties-per-state", type=int, default=3)
    p.add_argument("--noise-pct", type=float, default=10.0)
    p.add_argument("--missing-frac", type=float, default=0.3)
    p.add_argument("--single-missing-frac", type=float, default=0.05)
    p.add_argument("--block-grid", type=int, default=5)
    p.add_argument("--fc7-frac", type=float, default=0.0)

    p = sub.add_parser("clean", help="parse, clean, and attribute links")
    p.add_argument("--links")
    p.add_argument("--counties")
    p.add_argument("--urban-areas")

    p = sub.add_parser("tune", help="Bayesian hyperparameter search")
    p.add_argument("--links")
    p.add_argument("--target", choices=["mdv", "hdv"], required=True)
    p.add_argument("--n-iter", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--tune-sample", type=float,
                   help="stratified subsample fraction for trial fits")

    p = sub.add_parser("train", help="train both class models")
    p.add_argument("--links")
    p.add_argument("--mdv-params", help="JSON file with tuned MDV settings")
    p.add_argument("--hdv-params", help="JSON file with tuned HDV settings")

    p = sub.add_parser("impute", help="fill missing class AADT, derive LDV")
    p.add_argument("--links")
    p.add_argument("--mdv-model")
    p.add_argument("--hdv-model")

    p = sub.add_parser("density", help="census-block traffic density")
    p.add_argument("--links", help="imputed links CSV")
    p.add_argument("--blocks")
    p.add_argument("--buffer-m", type=float)
    p.add_argument("--arc-segments", type=int)

    p = sub.add_parser("validate", help="split metrics, residuals, county "
                                        "MAPE, cross-validation")
    p.add_argument("--links")
    p.add_argument("--test-frac", type=float)
    p.add_argument("--cv-folds", type=int)
    p.add_argument("--lowess-frac", type=float)

    p = sub.add_parser("sensitivity", help="noise-robustness curves")
    p.add_argument("--links")
    p.add_argument("--noise-target", choices=["predictor", "response", "both"],
                   default="both")
    p.add_argument("--levels", help="comma-separated noise percentages")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out_dir:
        cfg.out_dir = args.out_dir
    for attr in ("links", "blocks", "counties", "urban_areas"):
        flag = getattr(args, attr, None)
        if flag:
            setattr(cfg, attr, flag)
    if getattr(args, "buffer_m", None) is not None:
        cfg.buffer_m = args.buffer_m
    if getattr(args, "arc_segments", None) is not None:
        cfg.arc_segments = args.arc_segments
    if getattr(args, "n_iter", None) is not None:
        cfg.tune_n_iter = args.n_iter
    if getattr(args, "folds", None) is not None:
        cfg.tune_folds = args.folds
    if getattr(args, "tune_sample", None) is not None:
        cfg.tune_sample_frac = args.tune_sample
    if getattr(args, "test_frac", None) is not None:
        cfg.test_frac = args.test_frac
    if getattr(args, "cv_folds", None) is not None:
        cfg.cv_folds = args.cv_folds
    if getattr(args, "lowess_frac", None) is not None:
        cfg.lowess_frac = args.lowess_frac
    if getattr(args, "levels", None):
        cfg.noise_levels = tuple(float(x) for x in args.levels.split(","))
    if getattr(args, "mdv_params", None):
        cfg.mdv_params = params_from_dict(
            json.loads(Path(args.mdv_params).read_text(encoding="utf-8")))
    if getattr(args, "hdv_params", None):
        cfg.hdv_params = params_from_dict(
            json.loads(Path(args.hdv_params).read_text(encoding="utf-8")))
    return cfg


COMMANDS = {
    "synth": cmd_synth,
    "clean": cmd_clean,
    "tune": cmd_tune,
    "train": cmd_train,
    "impute": cmd_impute,
    "density": cmd_density,
    "validate": cmd_validate,
    "sensitivity": cmd_sensitivity,
}

_NEEDS_LINKS = {"clean", "tune", "train", "impute", "density", "validate",
                "sensitivity"}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command in _NEEDS_LINKS and not cfg.links:
            print("error: --links (or [paths] links in the config) is required",
                  file=sys.stderr)
            return 2
        if args.command == "density" and not cfg.blocks:
            print("error: --blocks is required for density", file=sys.stderr)
            return 2
        return COMMANDS[args.command](cfg, args)
    except InvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 4
    except (IngestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
