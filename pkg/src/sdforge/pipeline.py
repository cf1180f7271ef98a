"""End-to-end pipeline: acquire, index, integrate, transform, analyse, model.

Phases run in a fixed order, each reading the previous phase's artifact
files and writing its own into the output directory.  With resume
enabled, a phase whose artifacts already exist is skipped.  Every
random choice is seeded from the config, so a rerun with the same
config reproduces every artifact byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acquire as acquire_mod
from . import stats as stats_mod
from .corpus import TAG_FULL_ID, TAG_SHORT_KEY, TAG_TARGET
from .descriptors import IdTags, lipinski_check, transform_dataset
from .errors import ConfigError, PhaseError
from .explain import dependence_table, sample_background, shap_summary
from .index import build_index, read_index, write_index
from .integrate import audit_collisions, extract_identifiers, extract_records, intersect, plan_extraction
from .models import (
    Dataset,
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
    predict_stratified,
    report_error_by_category,
    routing_disagreement,
    save_model,
    split_stratified,
)
from .models.io import MAGIC as MODEL_MAGIC  # noqa: F401  (documented re-export)

log = logging.getLogger(__name__)

PHASE_ORDER = [
    "fetch",
    "index",
    "intersect",
    "audit",
    "extract",
    "transform",
    "eda",
    "fit",
    "evaluate",
    "explain",
]

DEFAULT_LAMBDA_GRID = [10.0**k for k in range(-4, 3)]


@dataclass
class PipelineConfig:
    sources: list[list[str]]
    out_dir: str
    seed: int
    key_tag: str = TAG_FULL_ID
    short_tag: str | None = TAG_SHORT_KEY
    full_tag: str | None = TAG_FULL_ID
    target_tag: str = TAG_TARGET
    id_tags: IdTags = field(default_factory=IdTags)
    workers: int = 1
    min_sources: int | None = None
    test_fraction: float = 0.2
    split_bins: int = 10
    models: list[str] = field(default_factory=lambda: ["ridge", "gbm", "stratified"])
    lambda_grid: list[float] = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    cv_folds_linear: int = 5
    cv_folds_tree: int = 3
    forest_estimators: int = 100
    forest_depth: int = 12
    gbm_estimators: int = 150
    gbm_depth: int = 4
    shap_rows: int = 30
    shap_background: int = 100
    manifest: str | None = None
    fetch_retries: int = 3
    resume: bool = False

    def validate(self) -> None:
        if not self.sources or any(not group for group in self.sources):
            raise ConfigError("at least one source group with files is required")
        for group in self.sources:
            for path in group:
                if not os.path.exists(path):
                    raise ConfigError(f"source file does not exist: {path}")
        if self.seed is None:
            raise ConfigError("an explicit seed is required (no wall-clock defaults)")
        if self.manifest is not None and not os.path.exists(self.manifest):
            raise ConfigError(f"manifest does not exist: {self.manifest}")
        known = {"ridge", "lasso", "enet", "rf", "gbm", "stratified"}
        unknown = [m for m in self.models if m not in known]
        if unknown:
            raise ConfigError(f"unknown model families: {unknown}")


_CONFIG_KEYS = {
    "sources",
    "out_dir",
    "seed",
    "key_tag",
    "short_tag",
    "full_tag",
    "target_tag",
    "inchikey_tag",
    "smiles_tag",
    "inchi_tag",
    "workers",
    "min_sources",
    "test_fraction",
    "split_bins",
    "models",
    "lambda_grid",
    "cv_folds_linear",
    "cv_folds_tree",
    "forest_estimators",
    "forest_depth",
    "gbm_estimators",
    "gbm_depth",
    "shap_rows",
    "shap_background",
    "manifest",
    "fetch_retries",
}


def load_config_file(path: str | os.PathLike[str]) -> dict[str, str]:
    """Flat ``key = value`` config; ``#`` comments and blank lines ignored."""
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as stream:
        for line_no, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def config_from_mapping(values: dict[str, str]) -> PipelineConfig:
    def need(key: str) -> str:
        if key not in values or not values[key]:
            raise ConfigError(f"config key {key!r} is required")
        return values[key]

    sources = [
        [p.strip() for p in group.split(",") if p.strip()]
        for group in need("sources").split(";")
        if group.strip()
    ]
    kwargs: dict = {
        "sources": sources,
        "out_dir": need("out_dir"),
        "seed": int(need("seed")),
    }
    simple = {
        "key_tag": str,
        "short_tag": str,
        "full_tag": str,
        "target_tag": str,
        "workers": int,
        "test_fraction": float,
        "split_bins": int,
        "cv_folds_linear": int,
        "cv_folds_tree": int,
        "forest_estimators": int,
        "forest_depth": int,
        "gbm_estimators": int,
        "gbm_depth": int,
        "shap_rows": int,
        "shap_background": int,
        "manifest": str,
        "fetch_retries": int,
    }
    for key, cast in simple.items():
        if key in values and values[key]:
            kwargs[key] = cast(values[key])
    if "min_sources" in values and values["min_sources"]:
        kwargs["min_sources"] = int(values["min_sources"])
    if "models" in values and values["models"]:
        kwargs["models"] = [m.strip() for m in values["models"].split(",") if m.strip()]
    if "lambda_grid" in values and values["lambda_grid"]:
        kwargs["lambda_grid"] = [float(v) for v in values["lambda_grid"].split(",")]
    tag_kwargs = {}
    for cfg_key, attr in (("inchikey_tag", "inchikey"), ("smiles_tag", "smiles"), ("inchi_tag", "inchi")):
        if cfg_key in values and values[cfg_key]:
            tag_kwargs[attr] = values[cfg_key]
    if tag_kwargs:
        kwargs["id_tags"] = IdTags(**tag_kwargs)
    return PipelineConfig(**kwargs)


@dataclass
class PhaseRecord:
    name: str
    seconds: float
    skipped: bool = False


@dataclass
class RunReport:
    phases: list[PhaseRecord] = field(default_factory=list)
    counts: dict = field(default_factory=dict)
    model_metrics: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    lipinski: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "phases": [
                {"name": p.name, "seconds": p.seconds, "skipped": p.skipped} for p in self.phases
            ],
            "counts": self.counts,
            "model_metrics": self.model_metrics,
            "diagnostics": self.diagnostics,
            "lipinski": self.lipinski,
            "artifacts": self.artifacts,
        }


class _Artifacts:
    """Canonical artifact paths inside the run output directory."""

    def __init__(self, out_dir: str | os.PathLike[str]):
        self.out = Path(out_dir)
        self.fetched = self.out / "fetched"
        self.index = self.out / "index.tsv"
        self.intersection = self.out / "intersection.ids"
        self.source_counts = self.out / "source_counts.json"
        self.collisions = self.out / "collisions.tsv"
        self.extracted = self.out / "common.sdf"
        self.extract_counts = self.out / "extract_counts.json"
        self.dataset = self.out / "dataset.csv"
        self.transform_counts = self.out / "transform_counts.json"
        self.eda_dir = self.out / "eda"
        self.train = self.out / "train.csv"
        self.test = self.out / "test.csv"
        self.models_dir = self.out / "models"
        self.fit_summary = self.out / "fit_summary.json"
        self.metrics = self.out / "metrics.json"
        self.shap_dir = self.out / "shap"
        self.report = self.out / "report.md"
        self.summary = self.out / "summary.json"


def _write_dataset_subset(src_rows: list[dict], header: list[str], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as out:
        writer = csv.DictWriter(out, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(src_rows)


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Execute every phase in order; see module docstring for artifacts."""
    config.validate()
    art = _Artifacts(config.out_dir)
    art.out.mkdir(parents=True, exist_ok=True)
    report = RunReport()

    def phase(name: str, artifacts: list[Path], fn) -> None:
        if config.resume and artifacts and all(a.exists() for a in artifacts):
            report.phases.append(PhaseRecord(name=name, seconds=0.0, skipped=True))
            log.info("phase %s: artifacts present, skipped (resume)", name)
            return
        started = time.perf_counter()
        try:
            fn()
        except PhaseError:
            raise
        except Exception as exc:
            raise PhaseError(name, str(exc)) from exc
        report.phases.append(PhaseRecord(name=name, seconds=time.perf_counter() - started))
        log.info("phase %s: done in %.2fs", name, report.phases[-1].seconds)

    # ----- fetch (optional) -------------------------------------------------
    def do_fetch() -> None:
        entries = acquire_mod.load_manifest(config.manifest)
        fetch_report = acquire_mod.fetch_all(
            entries,
            art.fetched,
            workers=config.workers,
            max_retries=config.fetch_retries,
            seed=config.seed,
        )
        bad = [r for r in fetch_report.results if r.status not in ("ok", "skipped_existing")]
        if bad:
            raise PhaseError("fetch", f"{len(bad)} entries failed: {[r.dest_path for r in bad]}")
        report.counts["fetched"] = len(fetch_report.results)

    if config.manifest is not None:
        phase("fetch", [art.fetched], do_fetch)

    # ----- index ------------------------------------------------------------
    def do_index() -> None:
        index = build_index(config.sources[0], config.key_tag, workers=config.workers)
        write_index(index, art.index)
        report.counts["indexed"] = len(index)
        report.counts["index_duplicates"] = len(index.duplicate_log)
        report.counts["index_skipped"] = sum(s.skipped for s in index.build_stats.values())

    phase("index", [art.index], do_index)

    # ----- intersect ----------------------------------------------------------
    def do_intersect() -> None:
        sets = [
            extract_identifiers(group, config.key_tag, source_name=f"source_{i + 1}")
            for i, group in enumerate(config.sources)
        ]
        if len(sets) >= 2:
            common = intersect(sets, min_sources=config.min_sources)
        else:
            common = set(sets[0].identifiers)
        with open(art.intersection, "w", encoding="utf-8", newline="\n") as out:
            for ident in sorted(common):
                out.write(ident + "\n")
        per_source = {
            s.source_name: {"scanned": s.scanned, "unique": len(s.identifiers), "missing": s.missing}
            for s in sets
        }
        with open(art.source_counts, "w", encoding="utf-8") as out:
            json.dump({"per_source": per_source, "intersected": len(common)}, out, indent=1)
        report.counts["scanned"] = sum(s.scanned for s in sets)
        report.counts["intersected"] = len(common)

    phase("intersect", [art.intersection, art.source_counts], do_intersect)
    if "intersected" not in report.counts:  # resumed
        with open(art.source_counts, "r", encoding="utf-8") as stream:
            payload = json.load(stream)
        report.counts["intersected"] = payload["intersected"]
        report.counts["scanned"] = sum(v["scanned"] for v in payload["per_source"].values())

    # ----- audit --------------------------------------------------------------
    def do_audit() -> None:
        findings, missing = audit_collisions(config.sources[0], config.short_tag, config.full_tag)
        with open(art.collisions, "w", encoding="utf-8", newline="\n") as out:
            out.write("short_key\tfull_ids\n")
            for finding in findings:
                out.write(finding.short_key + "\t" + ";".join(finding.distinct_full_ids) + "\n")
        report.counts["collision_findings"] = len(findings)
        report.counts["audit_missing_tags"] = missing

    if config.short_tag and config.full_tag:
        phase("audit", [art.collisions], do_audit)

    # ----- extract ------------------------------------------------------------
    def do_extract() -> None:
        index = read_index(art.index)
        with open(art.intersection, "r", encoding="utf-8") as stream:
            targets = {line.rstrip("\n") for line in stream if line.strip()}
        plan, missing = plan_extraction(index, targets)
        with open(art.extracted, "wb") as sink:
            extraction = extract_records(plan, sink, verify_tag=config.key_tag)
        counts = {
            "targets": len(targets),
            "extracted": extraction.extracted,
            "missing_from_index": len(missing),
            "verification_failures": len(extraction.verification_failures),
        }
        with open(art.extract_counts, "w", encoding="utf-8") as out:
            json.dump(counts, out, indent=1)
        report.counts.update(counts)

    phase("extract", [art.extracted, art.extract_counts], do_extract)
    if "extracted" not in report.counts:
        with open(art.extract_counts, "r", encoding="utf-8") as stream:
            report.counts.update(json.load(stream))

    # ----- transform ------------------------------------------------------------
    def do_transform() -> None:
        result = transform_dataset(
            art.extracted,
            art.dataset,
            target_tag=config.target_tag,
            id_tags=config.id_tags,
            workers=config.workers,
        )
        counts = {
            "transformed": result.rows_written,
            "excluded": result.excluded,
            "exclusion_reasons": result.exclusion_reasons,
        }
        with open(art.transform_counts, "w", encoding="utf-8") as out:
            json.dump(counts, out, indent=1)
        report.counts.update(counts)

    phase("transform", [art.dataset, art.transform_counts], do_transform)
    if "transformed" not in report.counts:
        with open(art.transform_counts, "r", encoding="utf-8") as stream:
            report.counts.update(json.load(stream))

    # ----- eda ------------------------------------------------------------------
    def do_eda() -> None:
        art.eda_dir.mkdir(parents=True, exist_ok=True)
        data = load_dataset_csv(art.dataset)
        full = load_dataset_csv(
            art.dataset,
            feature_names=[*data.feature_names, "HeavyAtomCount"],
        )
        with open(art.eda_dir / "summary.csv", "w", encoding="utf-8", newline="") as out:
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
        r, p, _flagged = stats_mod.pearson_matrix(matrix)
        with open(art.eda_dir / "correlation.csv", "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["column", *names])
            for i, name in enumerate(names):
                writer.writerow([name, *[f"{v:.6f}" for v in r[i]]])
        vif_values = stats_mod.vif(full.x)
        with open(art.eda_dir / "vif.csv", "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["feature", "vif"])
            for name, value in zip(full.feature_names, vif_values):
                writer.writerow([name, "inf" if math.isinf(value) else f"{value:.6f}"])
        outlier_idx, bounds = stats_mod.iqr_outliers(full.y)
        with open(art.eda_dir / "outliers.txt", "w", encoding="utf-8", newline="\n") as out:
            out.write(f"# target bounds: [{bounds[0]:.6f}, {bounds[1]:.6f}]\n")
            for i in outlier_idx:
                out.write(full.row_ids[i] + "\n")
        k2, k2_p = stats_mod.normality_test(full.y, subsample=5000, seed=config.seed)
        pca_result = stats_mod.pca(data.x, k=2)
        with open(art.eda_dir / "pca.csv", "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["pc1", "pc2", "logP_target"])
            for row, y_val in zip(pca_result.projected, full.y):
                writer.writerow([f"{row[0]:.6f}", f"{row[1]:.6f}", f"{y_val:.6f}"])
        verdicts = [
            lipinski_check(
                molwt=full.column("MolWt")[i],
                logp=full.y[i],
                donors=full.column("NumHDonors")[i],
                acceptors=full.column("NumHAcceptors")[i],
            )
            for i in range(full.n)
        ]
        n = len(verdicts)
        lipinski = {
            "compliant": sum(v.compliant for v in verdicts) / n,
            "molwt": sum(v.passes_molwt for v in verdicts) / n,
            "logp": sum(v.passes_logp for v in verdicts) / n,
            "donors": sum(v.passes_donors for v in verdicts) / n,
            "acceptors": sum(v.passes_acceptors for v in verdicts) / n,
        }
        diagnostics = {
            "normality": {
                "method": "dagostino_pearson_k2 (substitute for shapiro-wilk)",
                "statistic": k2,
                "p_value": k2_p,
                "subsample": 5000,
            },
            "vif": dict(zip(full.feature_names, [None if math.isinf(v) else v for v in vif_values])),
            "pca_explained_2": float(np.sum(pca_result.explained_variance_ratio)),
        }
        with open(art.eda_dir / "eda_summary.json", "w", encoding="utf-8") as out:
            json.dump({"lipinski": lipinski, "diagnostics": diagnostics}, out, indent=1)
        report.lipinski = lipinski
        report.diagnostics.update(diagnostics)

    phase("eda", [art.eda_dir / "eda_summary.json"], do_eda)
    if not report.lipinski:
        with open(art.eda_dir / "eda_summary.json", "r", encoding="utf-8") as stream:
            payload = json.load(stream)
        report.lipinski = payload["lipinski"]
        report.diagnostics.update(payload["diagnostics"])

    # ----- fit --------------------------------------------------------------------
    def do_fit() -> None:
        art.models_dir.mkdir(parents=True, exist_ok=True)
        data = load_dataset_csv(art.dataset)
        # split on positional ids so the CSV rows can be partitioned exactly
        positional = Dataset(
            x=data.x,
            y=data.y,
            feature_names=data.feature_names,
            row_ids=[str(i) for i in range(data.n)],
        )
        train_part, _test_part = split_stratified(
            positional, test_fraction=config.test_fraction, bins=config.split_bins, seed=config.seed
        )
        train_positions = {int(i) for i in train_part.row_ids}
        with open(art.dataset, "r", encoding="utf-8", newline="") as stream:
            reader = csv.DictReader(stream)
            header = list(reader.fieldnames or [])
            all_rows = list(reader)
        train_rows = [row for i, row in enumerate(all_rows) if i in train_positions]
        test_rows = [row for i, row in enumerate(all_rows) if i not in train_positions]
        _write_dataset_subset(train_rows, header, art.train)
        _write_dataset_subset(test_rows, header, art.test)
        train = load_dataset_csv(art.train)

        fit_summary: dict = {"selected": {}}
        for family in config.models:
            if family == "ridge":
                grid = [{"lam": lam} for lam in config.lambda_grid]
                best, _points = cross_validate(train, "ridge", grid, folds=config.cv_folds_linear, seed=config.seed)
                model = fit_linear(train, "ridge", lam=best["lam"])
            elif family == "lasso":
                grid = [{"lam": lam} for lam in config.lambda_grid]
                best, _points = cross_validate(train, "lasso", grid, folds=config.cv_folds_linear, seed=config.seed)
                model = fit_linear(train, "lasso", lam=best["lam"])
            elif family == "enet":
                grid = [
                    {"lam": lam, "l1_ratio": ratio}
                    for lam in config.lambda_grid
                    for ratio in (0.2, 0.5, 0.8)
                ]
                best, _points = cross_validate(train, "enet", grid, folds=config.cv_folds_linear, seed=config.seed)
                model = fit_linear(train, "elasticnet", lam=best["lam"], l1_ratio=best["l1_ratio"])
            elif family == "rf":
                params = ForestParams(
                    n_estimators=config.forest_estimators,
                    max_depth=config.forest_depth,
                    min_samples_leaf=5,
                )
                best = {"n_estimators": params.n_estimators, "max_depth": params.max_depth}
                model = fit_forest(train, params, seed=config.seed)
            elif family == "gbm":
                params = GbmParams(
                    n_estimators=config.gbm_estimators,
                    max_depth=config.gbm_depth,
                    learning_rate=0.1,
                )
                best = {"n_estimators": params.n_estimators, "max_depth": params.max_depth}
                model = fit_gbm(train, params, seed=config.seed)
            elif family == "stratified":
                ridge_grid = [{"lam": lam} for lam in config.lambda_grid]
                chosen, _points = cross_validate(
                    train, "ridge", ridge_grid, folds=config.cv_folds_linear, seed=config.seed
                )
                best = {"lam": chosen["lam"]}
                model = fit_stratified(train, lam=chosen["lam"])
            else:  # pragma: no cover - validated in config
                raise PhaseError("fit", f"unknown family {family}")
            save_model(model, art.models_dir / f"{family}.model")
            fit_summary["selected"][family] = best
        with open(art.fit_summary, "w", encoding="utf-8") as out:
            json.dump(fit_summary, out, indent=1)

    phase("fit", [art.train, art.test, art.fit_summary], do_fit)

    # ----- evaluate ------------------------------------------------------------------
    def do_evaluate() -> None:
        train = load_dataset_csv(art.train)
        test = load_dataset_csv(art.test)
        metrics: dict = {}
        best_family = None
        best_r2 = -math.inf
        for family in config.models:
            model = load_model(art.models_dir / f"{family}.model")
            m_train = evaluate(model, train)
            m_test = evaluate(model, test)
            entry = {
                "r2_train": m_train.r2,
                "r2_test": m_test.r2,
                "rmse_test": m_test.rmse,
                "mae_test": m_test.mae,
            }
            if family in ("ridge", "lasso", "enet"):
                residuals = test.y - model.predict(test.x)
                z = model.scaler.transform(test.x)
                bp = stats_mod.breusch_pagan(residuals, z)
                entry["breusch_pagan"] = {
                    "lm": bp.lm_statistic,
                    "df": bp.degrees_of_freedom,
                    "p_value": bp.p_value,
                }
            if family == "stratified":
                _preds, labels = predict_stratified(model, test.x)
                entry["route_a_fraction"] = float(np.mean(labels == "A"))
                entry["routing_disagreement"] = routing_disagreement(model, test.x)
            metrics[family] = entry
            if not math.isnan(m_test.r2) and m_test.r2 > best_r2:
                best_family, best_r2 = family, m_test.r2
        best_model = load_model(art.models_dir / f"{best_family}.model")
        categories = report_error_by_category(best_model.predict(test.x), test.y)
        metrics["error_by_category"] = {
            "model": best_family,
            "bins": [
                {
                    "label": c.label,
                    "count": c.count,
                    "median_abs_error": None if math.isnan(c.median_abs_error) else c.median_abs_error,
                    "iqr_abs_error": None if math.isnan(c.iqr_abs_error) else c.iqr_abs_error,
                }
                for c in categories
            ],
        }
        metrics["best_family"] = best_family
        with open(art.metrics, "w", encoding="utf-8") as out:
            json.dump(metrics, out, indent=1)
        report.model_metrics = metrics

    phase("evaluate", [art.metrics], do_evaluate)
    if not report.model_metrics:
        with open(art.metrics, "r", encoding="utf-8") as stream:
            report.model_metrics = json.load(stream)

    # ----- explain ---------------------------------------------------------------------
    def do_explain() -> None:
        art.shap_dir.mkdir(parents=True, exist_ok=True)
        train = load_dataset_csv(art.train)
        test = load_dataset_csv(art.test)
        preferred = [f for f in ("rf", "gbm") if f in config.models]
        family = preferred[0] if preferred else report.model_metrics.get("best_family", config.models[0])
        if family == "stratified":
            family = "ridge" if "ridge" in config.models else config.models[0]
        model = load_model(art.models_dir / f"{family}.model")
        background = sample_background(train.x, size=config.shap_background, seed=config.seed)
        rng = np.random.default_rng(config.seed)
        take = min(config.shap_rows, test.n)
        rows_idx = rng.choice(test.n, size=take, replace=False)
        rows = test.x[rows_idx]
        summary, explanations = shap_summary(model, rows, background, train.feature_names)
        with open(art.shap_dir / "summary.csv", "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["feature", "mean_abs_phi", "direction"])
            for j, name in enumerate(summary.feature_names):
                writer.writerow([name, f"{summary.mean_abs_phi[j]:.8f}", int(summary.direction[j])])
        with open(art.shap_dir / "phi.csv", "w", encoding="utf-8", newline="") as out:
            writer = csv.writer(out, lineterminator="\n")
            writer.writerow(["row_id", "base_value", *summary.feature_names])
            for pos, e in zip(rows_idx, explanations):
                writer.writerow(
                    [test.row_ids[pos], f"{e.base_value:.8f}", *[f"{v:.8f}" for v in e.phi]]
                )
        for name in summary.feature_names:
            table = dependence_table(explanations, name)
            with open(art.shap_dir / f"dependence_{name}.csv", "w", encoding="utf-8", newline="") as out:
                writer = csv.writer(out, lineterminator="\n")
                writer.writerow([name, "phi"])
                for value, phi in table:
                    writer.writerow([f"{value:.8f}", f"{phi:.8f}"])
        report.diagnostics["shap"] = {
            "model": family,
            "ranking": list(summary.ranking),
            "rows": int(take),
            "background": int(background.shape[0]),
        }

    phase("explain", [art.shap_dir / "summary.csv"], do_explain)

    report.artifacts = {
        "index": str(art.index),
        "intersection": str(art.intersection),
        "extracted": str(art.extracted),
        "dataset": str(art.dataset),
        "train": str(art.train),
        "test": str(art.test),
        "models_dir": str(art.models_dir),
        "metrics": str(art.metrics),
        "eda_dir": str(art.eda_dir),
        "shap_dir": str(art.shap_dir),
    }
    generate_report(report, config.out_dir)
    return report


def generate_report(run: RunReport, out_dir: str | os.PathLike[str]) -> None:
    """Write the human-readable report and the machine summary."""
    art = _Artifacts(out_dir)
    lines = ["# Run report", ""]
    lines.append("## Phases")
    lines.append("")
    lines.append("| phase | seconds | skipped |")
    lines.append("|---|---|---|")
    for p in run.phases:
        lines.append(f"| {p.name} | {p.seconds:.2f} | {'yes' if p.skipped else 'no'} |")
    lines.append("")
    lines.append("## Counts")
    lines.append("")
    for key, value in run.counts.items():
        lines.append(f"- {key}: {value}")
    if run.lipinski:
        lines.append("")
        lines.append("## Rule-of-five compliance")
        lines.append("")
        lines.append("| criterion | fraction |")
        lines.append("|---|---|")
        for key, value in run.lipinski.items():
            lines.append(f"| {key} | {value:.4f} |")
    if run.model_metrics:
        lines.append("")
        lines.append("## Model comparison")
        lines.append("")
        lines.append("| model | r2 train | r2 test | rmse test | mae test |")
        lines.append("|---|---|---|---|---|")
        for family, entry in run.model_metrics.items():
            if not isinstance(entry, dict) or "r2_test" not in entry:
                continue
            lines.append(
                f"| {family} | {entry['r2_train']:.4f} | {entry['r2_test']:.4f} "
                f"| {entry['rmse_test']:.4f} | {entry['mae_test']:.4f} |"
            )
        bins = run.model_metrics.get("error_by_category", {}).get("bins", [])
        if bins:
            lines.append("")
            lines.append("## Absolute error by target category")
            lines.append("")
            lines.append("| bin | count | median | iqr |")
            lines.append("|---|---|---|---|")
            for b in bins:
                med = "-" if b["median_abs_error"] is None else f"{b['median_abs_error']:.4f}"
                iqr = "-" if b["iqr_abs_error"] is None else f"{b['iqr_abs_error']:.4f}"
                lines.append(f"| {b['label']} | {b['count']} | {med} | {iqr} |")
    shap_info = run.diagnostics.get("shap")
    if shap_info:
        lines.append("")
        lines.append("## Feature importance (mean |phi| ranking)")
        lines.append("")
        for rank, name in enumerate(shap_info["ranking"], start=1):
            lines.append(f"{rank}. {name}")
    lines.append("")
    with open(art.report, "w", encoding="utf-8", newline="\n") as out:
        out.write("\n".join(lines))
    with open(art.summary, "w", encoding="utf-8") as out:
        json.dump(run.to_json(), out, indent=1)


def load_run_summary(out_dir: str | os.PathLike[str]) -> RunReport:
    """Parse a machine summary back into a RunReport (round-trip)."""
    art = _Artifacts(out_dir)
    with open(art.summary, "r", encoding="utf-8") as stream:
        payload = json.load(stream)
    report = RunReport(
        phases=[PhaseRecord(p["name"], p["seconds"], p["skipped"]) for p in payload["phases"]],
        counts=payload["counts"],
        model_metrics=payload["model_metrics"],
        diagnostics=payload["diagnostics"],
        lipinski=payload["lipinski"],
        artifacts=payload["artifacts"],
    )
    return report
