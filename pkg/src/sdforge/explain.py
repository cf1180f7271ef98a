"""Exact Shapley attribution by full subset enumeration.

Each feature's value is credited with its marginal contribution to the
model prediction, averaged over every subset of the remaining features
with the classic combinatorial weights |S|! (p - |S| - 1)! / p!.  The
expectation over "absent" features is interventional: absent columns
are filled from a background sample of training rows, and the subset
value is the mean model output over that background.  With p features
this costs 2^p background-batch predictions per explained row, which is
why the enumeration refuses to run above 15 features instead of
silently sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ShapExplanation:
    feature_names: tuple[str, ...]
    phi: np.ndarray
    base_value: float
    row: np.ndarray

    @property
    def reconstructed_prediction(self) -> float:
        return self.base_value + float(self.phi.sum())


@dataclass(frozen=True)
class ShapSummary:
    feature_names: tuple[str, ...]
    mean_abs_phi: np.ndarray
    ranking: tuple[str, ...]  # descending by mean |phi|
    direction: np.ndarray  # sign of corr(feature value, phi); 0 when undefined


MAX_ENUMERATED_FEATURES = 15


def subset_weights(p: int) -> np.ndarray:
    """Weight for a subset of size s (s = 0..p-1): s! (p-s-1)! / p!.

    For any fixed feature these weights sum to exactly 1 over all
    subsets of the others.
    """
    return np.array(
        [math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)]
    )


def _subset_values(model, row: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Mean model output over the background for every feature subset.

    Index m runs over bitmasks: feature j is "present" (taken from the
    explained row) when bit j of m is set, otherwise the background
    row's value is kept.
    """
    b, p = background.shape
    values = np.empty(1 << p)
    for mask in range(1 << p):
        batch = background.copy()
        for j in range(p):
            if mask >> j & 1:
                batch[:, j] = row[j]
        values[mask] = float(np.mean(model.predict(batch)))
    return values


def shapley_exact(
    model,
    row: np.ndarray,
    background: np.ndarray,
    feature_names: list[str] | None = None,
) -> ShapExplanation:
    """Exact attribution of one prediction over a background sample.

    ``model`` needs only a ``predict(x) -> y`` method.  The returned
    attribution satisfies local accuracy by construction: base value
    plus the sum of contributions telescopes to the model's prediction
    of the row.
    """
    x = np.asarray(row, dtype=float).ravel()
    bg = np.asarray(background, dtype=float)
    if bg.ndim != 2 or bg.shape[0] < 1:
        raise ValueError("background must be a non-empty 2-d array")
    p = x.shape[0]
    if bg.shape[1] != p:
        raise ValueError("row and background disagree on feature count")
    if p > MAX_ENUMERATED_FEATURES:
        raise ValueError(
            f"exact enumeration over {p} features needs 2^{p} subsets; "
            f"refusing above {MAX_ENUMERATED_FEATURES} (no silent sampling)"
        )
    names = tuple(feature_names) if feature_names else tuple(f"x{j}" for j in range(p))
    if len(names) != p:
        raise ValueError("feature_names length must match the row")

    values = _subset_values(model, x, bg)
    weights = subset_weights(p)
    phi = np.zeros(p)
    full = (1 << p) - 1
    for j in range(p):
        bit = 1 << j
        for mask in range(1 << p):
            if mask & bit:
                continue
            size = (mask & full).bit_count()
            phi[j] += weights[size] * (values[mask | bit] - values[mask])
    return ShapExplanation(
        feature_names=names,
        phi=phi,
        base_value=float(values[0]),
        row=x,
    )


def sample_background(x: np.ndarray, size: int = 100, seed: int = 0) -> np.ndarray:
    """Seeded background sample (without replacement when possible)."""
    data = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    if data.shape[0] <= size:
        return data.copy()
    return data[rng.choice(data.shape[0], size=size, replace=False)]


def shap_summary(
    model,
    rows: np.ndarray,
    background: np.ndarray,
    feature_names: list[str] | None = None,
) -> tuple[ShapSummary, list[ShapExplanation]]:
    """Mean |phi| ranking over an evaluation set, plus each explanation."""
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("need a non-empty 2-d evaluation set")
    explanations = [
        shapley_exact(model, data[i], background, feature_names) for i in range(data.shape[0])
    ]
    phis = np.vstack([e.phi for e in explanations])
    mean_abs = np.mean(np.abs(phis), axis=0)
    names = explanations[0].feature_names
    order = np.argsort(-mean_abs, kind="stable")
    direction = np.zeros(len(names))
    for j in range(len(names)):
        col = data[:, j]
        if np.std(col) > 0 and np.std(phis[:, j]) > 0:
            direction[j] = np.sign(np.corrcoef(col, phis[:, j])[0, 1])
    return (
        ShapSummary(
            feature_names=names,
            mean_abs_phi=mean_abs,
            ranking=tuple(names[i] for i in order),
            direction=direction,
        ),
        explanations,
    )


def dependence_table(
    explanations: list[ShapExplanation],
    feature: str,
) -> np.ndarray:
    """(feature value, phi) pairs for one feature, one row per instance."""
    if not explanations:
        return np.empty((0, 2))
    names = explanations[0].feature_names
    if feature not in names:
        raise ValueError(f"feature {feature!r} not in roster {names}")
    j = names.index(feature)
    return np.array([[e.row[j], e.phi[j]] for e in explanations])
