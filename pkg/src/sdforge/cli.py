"""Command-line interface.

Subcommands map onto the pipeline phases plus corpus generation and
reporting.  Exit codes: 0 success, 2 configuration/usage error, 3 phase
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import acquire as acquire_mod
from . import stats as stats_mod
from .corpus import CorpusSpec, generate_corpus
from .descriptors import IdTags, transform_dataset
from .errors import ConfigError, PhaseError, SdforgeError
from .explain import dependence_table, sample_background, shap_summary
from .index import build_index, read_index, write_index
from .integrate import (
    IdentifierSet,
    audit_collisions,
    extract_identifiers,
    extract_records,
    intersect,
    plan_extraction,
)
from .models import (
    ForestParams,
    GbmParams,
    cross_validate,
    evaluate,
    fit_forest,
    fit_gbm,
    fit_linear,
    fit_stratified,
    load_dataset_csv,
    load_model,
    save_model,
)
from .pipeline import (
    DEFAULT_LAMBDA_GRID,
    PipelineConfig,
    config_from_mapping,
    generate_report,
    load_config_file,
    load_run_summary,
    run_pipeline,
)

log = logging.getLogger("sdforge")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="explicit random seed")
    parser.add_argument("--workers", type=int, help="parallel workers")
    parser.add_argument("--resume", action="store_true", help="skip phases whose artifacts exist")
    parser.add_argument("--out", help="output path or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="manifest-driven checksum-verified download")
    p.add_argument("--manifest", required=True)
    p.add_argument("--retries", type=int, default=3)
    _add_common(p)

    p = sub.add_parser("index", help="build the byte-offset index over SDF files")
    p.add_argument("--sources", required=True, help="comma-separated SDF paths")
    p.add_argument("--key-tag", required=True)
    _add_common(p)

    p = sub.add_parser("intersect", help="intersect identifier sets across sources")
    p.add_argument("--sources", nargs="+", required=True, help=".ids lists or .sdf files")
    p.add_argument("--min-sources", type=int)
    p.add_argument("--key-tag", help="needed when sources are SDF files")
    _add_common(p)

    p = sub.add_parser("audit", help="find short-key collisions against full identifiers")
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--short-tag", required=True)
    p.add_argument("--full-tag", required=True)
    _add_common(p)

    p = sub.add_parser("extract", help="extract target records via the index")
    p.add_argument("--index", required=True)
    p.add_argument("--targets", required=True, help="one identifier per line")
    p.add_argument("--verify-tag")
    _add_common(p)

    p = sub.add_parser("transform", help="SDF to 12-column descriptor dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--target-tag", default="PUBCHEM_XLOGP3")
    p.add_argument("--inchikey-tag")
    p.add_argument("--smiles-tag")
    p.add_argument("--inchi-tag")
    _add_common(p)

    p = sub.add_parser("eda", help="summary statistics, correlations, VIF, outliers, PCA")
    p.add_argument("--data", required=True)
    p.add_argument("--predictions", help="optional CSV with a `prediction` column")
    _add_common(p)

    p = sub.add_parser("fit", help="fit a model family with cross-validated hyperparameters")
    p.add_argument("--data", required=True)
    p.add_argument(
        "--model",
        required=True,
        choices=["ridge", "lasso", "enet", "rf", "gbm", "stratified"],
    )
    p.add_argument("--cv", type=int, default=5)
    _add_common(p)

    p = sub.add_parser("evaluate", help="metrics of a saved model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _add_common(p)

    p = sub.add_parser("explain", help="exact Shapley attributions for sample rows")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--background", required=True)
    p.add_argument("--n-background", type=int, default=100)
    p.add_argument("--n-rows", type=int, default=30)
    _add_common(p)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    _add_common(p)

    p = sub.add_parser("gen-corpus", help="generate a synthetic multi-source corpus")
    p.add_argument("--sources", type=int, default=3)
    p.add_argument("--records", type=int, default=5000)
    p.add_argument("--core", type=int, default=1200)
    p.add_argument("--collisions", type=int, default=3)
    _add_common(p)

    p = sub.add_parser("report", help="regenerate the report from a run's machine summary")
    p.add_argument("--run-dir", required=True)
    _add_common(p)

    return parser


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


def _cmd_fetch(args) -> int:
    entries = acquire_mod.load_manifest(args.manifest)
    report = acquire_mod.fetch_all(
        entries,
        _require(args.out, "--out"),
        workers=args.workers or 4,
        max_retries=args.retries,
        seed=args.seed,
    )
    for result in report.results:
        log.info("[fetch] %s: %s (attempts=%d)", result.dest_path, result.status, result.attempts)
    failures = [r for r in report.results if r.status not in ("ok", "skipped_existing")]
    if failures:
        raise PhaseError("fetch", f"{len(failures)} entries failed")
    return 0


def _cmd_index(args) -> int:
    paths = [p for p in args.sources.split(",") if p]
    index = build_index(paths, args.key_tag, workers=args.workers or 1)
    write_index(index, _require(args.out, "--out"))
    log.info("[index] %d entries, %d duplicates", len(index), len(index.duplicate_log))
    return 0


def _load_identifier_source(path: str, key_tag: str | None) -> IdentifierSet:
    if path.endswith(".sdf"):
        if not key_tag:
            raise ConfigError("--key-tag is required when intersecting SDF files")
        return extract_identifiers([path], key_tag, source_name=path)
    with open(path, "r", encoding="utf-8") as stream:
        ids = {line.rstrip("\n") for line in stream if line.strip()}
    return IdentifierSet(source_name=path, identifiers=ids, scanned=len(ids))


def _cmd_intersect(args) -> int:
    sets = [_load_identifier_source(p, args.key_tag) for p in args.sources]
    common = intersect(sets, min_sources=args.min_sources)
    out = _require(args.out, "--out")
    with open(out, "w", encoding="utf-8", newline="\n") as sink:
        for ident in sorted(common):
            sink.write(ident + "\n")
    log.info("[intersect] %d identifiers", len(common))
    return 0


def _cmd_audit(args) -> int:
    findings, missing = audit_collisions(args.sources, args.short_tag, args.full_tag)
    out = _require(args.out, "--out")
    with open(out, "w", encoding="utf-8", newline="\n") as sink:
        sink.write("short_key\tfull_ids\n")
        for finding in findings:
            sink.write(finding.short_key + "\t" + ";".join(finding.distinct_full_ids) + "\n")
    log.info("[audit] %d collision groups, %d records missing tags", len(findings), missing)
    return 0


def _cmd_extract(args) -> int:
    index = read_index(args.index)
    with open(args.targets, "r", encoding="utf-8") as stream:
        targets = {line.rstrip("\n") for line in stream if line.strip()}
    plan, missing = plan_extraction(index, targets)
    with open(_require(args.out, "--out"), "wb") as sink:
        report = extract_records(plan, sink, verify_tag=args.verify_tag)
    log.info(
        "[extract] %d extracted, %d missing, %d verification failures",
        report.extracted,
        len(missing),
        len(report.verification_failures),
    )
    return 0


def _cmd_transform(args) -> int:
    tags = IdTags()
    overrides = {}
    if args.inchikey_tag:
        overrides["inchikey"] = args.inchikey_tag
    if args.smiles_tag:
        overrides["smiles"] = args.smiles_tag
    if args.inchi_tag:
        overrides["inchi"] = args.inchi_tag
    if overrides:
        tags = IdTags(**{**tags.__dict__, **overrides})
    report = transform_dataset(
        args.input,
        _require(args.out, "--out"),
        target_tag=args.target_tag,
        id_tags=tags,
        workers=args.workers or 1,
    )
    log.info(
        "[transform] %d rows, %d excluded %s",
        report.rows_written,
        report.excluded,
        report.exclusion_reasons,
    )
    return 0


def _cmd_eda(args) -> int:
    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_dataset_csv(args.data)
    full = load_dataset_csv(args.data, feature_names=[*data.feature_names, "HeavyAtomCount"])
    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            ["column", "mean", "median", "std_dev", "min", "max", "iqr", "skewness", "excess_kurtosis"]
        )
        for name, column in [("logP_target", full.y), *[(n, full.column(n)) for n in full.feature_names]]:
            s = stats_mod.summarize(column)
            writer.writerow(
                [name, s.mean, s.median, s.std_dev, s.min, s.max, s.iqr, s.skewness, s.excess_kurtosis]
            )
    matrix = np.column_stack([full.x, full.y])
    names = [*full.feature_names, "logP_target"]
    r, _p, _flags = stats_mod.pearson_matrix(matrix)
    with open(out_dir / "correlation.csv", "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["column", *names])
        for i, name in enumerate(names):
            writer.writerow([name, *[f"{v:.6f}" for v in r[i]]])
    vif_values = stats_mod.vif(full.x)
    with open(out_dir / "vif.csv", "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["feature", "vif"])
        for name, value in zip(full.feature_names, vif_values):
            writer.writerow([name, "inf" if math.isinf(value) else f"{value:.6f}"])
    outlier_idx, bounds = stats_mod.iqr_outliers(full.y)
    with open(out_dir / "outliers.txt", "w", encoding="utf-8", newline="\n") as out:
        out.write(f"# target bounds: [{bounds[0]:.6f}, {bounds[1]:.6f}]\n")
        for i in outlier_idx:
            out.write(full.row_ids[i] + "\n")
    predictions = None
    if args.predictions:
        with open(args.predictions, "r", encoding="utf-8", newline="") as stream:
            rows = list(csv.DictReader(stream))
        predictions = np.array([float(row["prediction"]) for row in rows])
        if predictions.shape[0] != full.n:
            raise ConfigError("predictions row count must match the dataset")
    pca_result = stats_mod.pca(data.x, k=2)
    with open(out_dir / "pca.csv", "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        header = ["pc1", "pc2", "logP_target"]
        if predictions is not None:
            header.append("abs_error")
        writer.writerow(header)
        for i, (row, y_val) in enumerate(zip(pca_result.projected, full.y)):
            record = [f"{row[0]:.6f}", f"{row[1]:.6f}", f"{y_val:.6f}"]
            if predictions is not None:
                record.append(f"{abs(predictions[i] - y_val):.6f}")
            writer.writerow(record)
    log.info("[eda] wrote %s", out_dir)
    return 0


def _cmd_fit(args) -> int:
    seed = args.seed if args.seed is not None else 0
    train = load_dataset_csv(args.data)
    lambda_grid = list(DEFAULT_LAMBDA_GRID)
    if args.model in ("ridge", "lasso"):
        best, _ = cross_validate(
            train, args.model, [{"lam": lam} for lam in lambda_grid], folds=args.cv, seed=seed
        )
        model = fit_linear(train, "ridge" if args.model == "ridge" else "lasso", lam=best["lam"])
    elif args.model == "enet":
        grid = [{"lam": lam, "l1_ratio": r} for lam in lambda_grid for r in (0.2, 0.5, 0.8)]
        best, _ = cross_validate(train, "enet", grid, folds=args.cv, seed=seed)
        model = fit_linear(train, "elasticnet", lam=best["lam"], l1_ratio=best["l1_ratio"])
    elif args.model == "rf":
        grid = [
            {"n_estimators": 100, "max_depth": d, "min_samples_leaf": 5} for d in (10, 30)
        ]
        best, _ = cross_validate(train, "rf", grid, folds=min(args.cv, 3), seed=seed)
        model = fit_forest(train, ForestParams(**best), seed=seed)
    elif args.model == "gbm":
        grid = [
            {"n_estimators": 150, "max_depth": d, "learning_rate": 0.1} for d in (4, 10)
        ]
        best, _ = cross_validate(train, "gbm", grid, folds=min(args.cv, 3), seed=seed)
        model = fit_gbm(train, GbmParams(**best), seed=seed)
    else:
        best, _ = cross_validate(
            train, "ridge", [{"lam": lam} for lam in lambda_grid], folds=args.cv, seed=seed
        )
        model = fit_stratified(train, lam=best["lam"])
    save_model(model, _require(args.out, "--out"))
    log.info("[fit] %s -> %s (selected %s)", args.model, args.out, best)
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = load_dataset_csv(args.data)
    metrics = evaluate(model, data)
    payload = {"r2": metrics.r2, "rmse": metrics.rmse, "mae": metrics.mae}
    text = json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _cmd_explain(args) -> int:
    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    model = load_model(args.model)
    data = load_dataset_csv(args.data)
    bg_data = load_dataset_csv(args.background)
    background = sample_background(bg_data.x, size=args.n_background, seed=seed)
    rng = np.random.default_rng(seed)
    take = min(args.n_rows, data.n)
    rows_idx = rng.choice(data.n, size=take, replace=False)
    summary, explanations = shap_summary(model, data.x[rows_idx], background, data.feature_names)
    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["feature", "mean_abs_phi", "direction"])
        for j, name in enumerate(summary.feature_names):
            writer.writerow([name, f"{summary.mean_abs_phi[j]:.8f}", int(summary.direction[j])])
    with open(out_dir / "phi.csv", "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["row_id", "base_value", *summary.feature_names])
        for pos, e in zip(rows_idx, explanations):
            writer.writerow([data.row_ids[pos], f"{e.base_value:.8f}", *[f"{v:.8f}" for v in e.phi]])
    for name in summary.feature_names:
        table = dependence_table(explanations, name)
        with open(out_dir / f"dependence_{name}.csv", "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow([name, "phi"])
            for value, phi in table:
                writer.writerow([f"{value:.8f}", f"{phi:.8f}"])
    log.info("[explain] wrote %s (ranking: %s)", out_dir, ", ".join(summary.ranking))
    return 0


def _cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("run requires --config")
    values = load_config_file(args.config)
    if args.out:
        values["out_dir"] = args.out
    if args.seed is not None:
        values["seed"] = str(args.seed)
    if args.workers is not None:
        values["workers"] = str(args.workers)
    config = config_from_mapping(values)
    config.resume = bool(args.resume)
    report = run_pipeline(config)
    log.info("[run] complete; report at %s", Path(config.out_dir) / "report.md")
    for phase in report.phases:
        log.info("[run] phase %-10s %6.2fs%s", phase.name, phase.seconds, " (skipped)" if phase.skipped else "")
    return 0


def _cmd_gen_corpus(args) -> int:
    seed = args.seed if args.seed is not None else 0
    spec = CorpusSpec(
        sources=args.sources,
        records_per_source=args.records,
        common_core=args.core,
        collision_groups=args.collisions,
    )
    manifest = generate_corpus(spec, _require(args.out, "--out"), seed=seed)
    log.info(
        "[gen-corpus] %d sources x %d records, core %d, %d collision groups",
        spec.sources,
        spec.records_per_source,
        spec.common_core,
        len(manifest.collision_groups),
    )
    return 0


def _cmd_report(args) -> int:
    report = load_run_summary(args.run_dir)
    generate_report(report, args.run_dir)
    log.info("[report] regenerated %s", Path(args.run_dir) / "report.md")
    return 0


_COMMANDS = {
    "fetch": _cmd_fetch,
    "index": _cmd_index,
    "intersect": _cmd_intersect,
    "audit": _cmd_audit,
    "extract": _cmd_extract,
    "transform": _cmd_transform,
    "eda": _cmd_eda,
    "fit": _cmd_fit,
    "evaluate": _cmd_evaluate,
    "explain": _cmd_explain,
    "run": _cmd_run,
    "gen-corpus": _cmd_gen_corpus,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except PhaseError as exc:
        log.error("%s", exc)
        return 3
    except SdforgeError as exc:
        log.error("%s", exc)
        return 3
    except OSError as exc:
        log.error("%s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
