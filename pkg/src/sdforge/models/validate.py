"""Split protocol, cross-validation, metrics, and error breakdowns."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .data import Dataset
from .linear import fit_linear
from .trees import ForestParams, GbmParams, fit_forest, fit_gbm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Metrics:
    r2: float  # NaN when the evaluation target is constant (SST = 0)
    rmse: float
    mae: float


def compute_metrics(predictions: np.ndarray, targets: np.ndarray) -> Metrics:
    pred = np.asarray(predictions, dtype=float)
    y = np.asarray(targets, dtype=float)
    errors = pred - y
    sse = float(np.sum(errors**2))
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = math.nan if sst == 0.0 else 1.0 - sse / sst
    return Metrics(
        r2=r2,
        rmse=math.sqrt(sse / y.size),
        mae=float(np.mean(np.abs(errors))),
    )


def evaluate(model: Any, data: Dataset) -> Metrics:
    """Metrics of ``model.predict`` on a dataset; R^2 is taken about the
    mean of the evaluated data."""
    return compute_metrics(model.predict(data.x), data.y)


def split_stratified(
    data: Dataset,
    test_fraction: float = 0.2,
    bins: int = 10,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive train/test split preserving the target mix.

    Rows are binned by target quantiles; each bin contributes its
    rounded share to the test set, drawn from a seeded shuffle.  Bins
    with fewer than 2 rows merge into their lower neighbor (warned).
    Deterministic per seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    if data.n < bins * 2:
        raise ValueError(f"need at least {bins * 2} rows for {bins} bins")
    edges = np.quantile(data.y, np.linspace(0, 1, bins + 1)[1:-1])
    bin_ids = np.searchsorted(edges, data.y, side="right")

    counts = np.bincount(bin_ids, minlength=bins)
    merged = np.arange(bins)
    for b in range(bins):
        if 0 < counts[b] < 2:
            neighbor = b - 1 if b > 0 else b + 1
            log.warning("target bin %d has %d rows; merging into bin %d", b, counts[b], neighbor)
            merged[b] = neighbor
            counts[neighbor] += counts[b]
            counts[b] = 0
    bin_ids = merged[bin_ids]

    rng = np.random.default_rng(seed)
    test_mask = np.zeros(data.n, dtype=bool)
    for b in np.unique(bin_ids):
        rows = np.nonzero(bin_ids == b)[0]
        take = int(round(test_fraction * rows.size))
        chosen = rng.permutation(rows.size)[:take]
        test_mask[rows[chosen]] = True
    train_idx = np.nonzero(~test_mask)[0]
    test_idx = np.nonzero(test_mask)[0]
    return data.subset(train_idx), data.subset(test_idx)


def _fit_for_params(family: str, train: Dataset, params: dict, seed: int) -> Any:
    if family == "ridge":
        return fit_linear(train, "ridge", lam=params["lam"])
    if family == "lasso":
        return fit_linear(train, "lasso", lam=params["lam"])
    if family in ("enet", "elasticnet"):
        return fit_linear(train, "elasticnet", lam=params["lam"], l1_ratio=params["l1_ratio"])
    if family in ("rf", "random_forest"):
        return fit_forest(train, ForestParams(**params), seed=seed)
    if family in ("gbm", "gradient_boosting"):
        return fit_gbm(train, GbmParams(**params), seed=seed)
    raise ValueError(f"unknown model family {family!r}")


def _regularization_strength(family: str, params: dict) -> tuple:
    # used only to break exact score ties toward the stronger regularizer
    if family in ("ridge", "lasso", "enet", "elasticnet"):
        return (params["lam"],)
    return (-params.get("max_depth", 10**9), params.get("min_samples_leaf", 0))


@dataclass
class CvPoint:
    params: dict
    mean_score: float
    fold_scores: list[float]


def cross_validate(
    train: Dataset,
    family: str,
    grid: list[dict],
    folds: int = 5,
    seed: int = 0,
    fit_fn: Callable[[Dataset, dict, int], Any] | None = None,
) -> tuple[dict, list[CvPoint]]:
    """Pick hyperparameters by k-fold validation R^2.

    Folds are contiguous slices of one seeded permutation, identical for
    every grid point.  Exact score ties break toward the stronger
    regularizer (larger penalty, shallower trees).  Returns the winning
    params and the per-point score table.
    """
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(train.n)
    fold_slices = np.array_split(perm, folds)

    points: list[CvPoint] = []
    for params in grid:
        scores: list[float] = []
        for f in range(folds):
            val_idx = fold_slices[f]
            train_idx = np.concatenate([fold_slices[g] for g in range(folds) if g != f])
            fold_train = train.subset(train_idx)
            fold_val = train.subset(val_idx)
            if fit_fn is not None:
                model = fit_fn(fold_train, params, seed)
            else:
                model = _fit_for_params(family, fold_train, params, seed)
            scores.append(evaluate(model, fold_val).r2)
        points.append(CvPoint(params=params, mean_score=float(np.mean(scores)), fold_scores=scores))

    best = max(points, key=lambda pt: (pt.mean_score, _regularization_strength(family, pt.params)))
    return best.params, points


ERROR_BINS = [
    ("(-inf,0)", -math.inf, 0.0),
    ("[0,2)", 0.0, 2.0),
    ("[2,4) balanced", 2.0, 4.0),
    ("[4,5)", 4.0, 5.0),
    ("[5,inf)", 5.0, math.inf),
]


@dataclass(frozen=True)
class CategoryError:
    label: str
    lower: float
    upper: float
    count: int
    median_abs_error: float  # NaN for empty bins
    iqr_abs_error: float  # NaN for empty bins


def report_error_by_category(
    predictions: np.ndarray,
    targets: np.ndarray,
) -> list[CategoryError]:
    """Median and IQR of absolute error, bucketed by the target value.

    The [2, 4) bucket is labeled "balanced"; empty buckets are reported
    with NaN summaries rather than dropped.
    """
    pred = np.asarray(predictions, dtype=float)
    y = np.asarray(targets, dtype=float)
    if pred.shape != y.shape:
        raise ValueError("predictions and targets must align")
    abs_err = np.abs(pred - y)
    out: list[CategoryError] = []
    for label, lower, upper in ERROR_BINS:
        mask = (y >= lower) & (y < upper)
        errs = abs_err[mask]
        if errs.size:
            q1, q3 = np.percentile(errs, [25, 75])
            out.append(
                CategoryError(label, lower, upper, int(errs.size), float(np.median(errs)), float(q3 - q1))
            )
        else:
            out.append(CategoryError(label, lower, upper, 0, math.nan, math.nan))
    return out
