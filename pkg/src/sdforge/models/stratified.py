"""Two-tier predictor: specialized models for drug-like vs. extreme rows.

Training strata come from the rule-of-five verdict computed on each
row's own feature values and its known target.  At inference the target
is unknown, so the size/donor/acceptor criteria always come from the
features, while the logP criterion is applied only when an estimate is
available; by default a global ridge fitted alongside the strata
supplies that provisional estimate.
"""

from __future__ import annotations

import numpy as np

from ..descriptors import lipinski_check
from .data import Dataset
from .linear import LinearModel, fit_linear

ROUTING_FEATURES = ("MolWt", "NumHDonors", "NumHAcceptors")

LABEL_DRUG_LIKE = "A"
LABEL_EXTREME = "B"


def _routing_columns(feature_names: list[str]) -> tuple[int, int, int]:
    try:
        return tuple(feature_names.index(name) for name in ROUTING_FEATURES)  # type: ignore[return-value]
    except ValueError as exc:
        raise ValueError(f"routing needs feature columns {ROUTING_FEATURES}") from exc


def route_rows(
    x: np.ndarray,
    feature_names: list[str],
    logp_estimates: np.ndarray | None = None,
) -> np.ndarray:
    """Label each row A (drug-like) or B (extreme) from its own values.

    Without estimates the logP criterion is skipped (feature-only
    routing); with estimates all four criteria apply.
    """
    molwt_col, donors_col, acceptors_col = _routing_columns(feature_names)
    data = np.asarray(x, dtype=float)
    labels = np.empty(data.shape[0], dtype="<U1")
    for i in range(data.shape[0]):
        logp = 0.0 if logp_estimates is None else float(logp_estimates[i])
        verdict = lipinski_check(
            molwt=float(data[i, molwt_col]),
            logp=logp,
            donors=float(data[i, donors_col]),
            acceptors=float(data[i, acceptors_col]),
        )
        labels[i] = LABEL_DRUG_LIKE if verdict.compliant else LABEL_EXTREME
    return labels


class StratifiedPredictor:
    def __init__(
        self,
        model_a: LinearModel,
        model_b: LinearModel,
        feature_names: list[str],
        router_model: LinearModel | None = None,
    ):
        self.model_a = model_a
        self.model_b = model_b
        self.feature_names = list(feature_names)
        self.router_model = router_model

    def predict(self, x: np.ndarray) -> np.ndarray:
        return predict_stratified(self, x)[0]


def fit_stratified(
    train: Dataset,
    lam: float = 1.0,
    min_stratum: int = 50,
    use_estimate_router: bool = True,
) -> StratifiedPredictor:
    """Fit ridge models on the compliant and violating training strata.

    Stratum membership uses the true training target for the logP
    criterion.  Either stratum smaller than ``min_stratum`` is an error
    (too small to fit).  When ``use_estimate_router`` is set, a global
    ridge on the full training data is kept for provisional logP
    estimates at inference.
    """
    labels = route_rows(train.x, train.feature_names, logp_estimates=train.y)
    mask_a = labels == LABEL_DRUG_LIKE
    n_a, n_b = int(mask_a.sum()), int((~mask_a).sum())
    if n_a < min_stratum or n_b < min_stratum:
        raise ValueError(
            f"stratum too small to fit: drug-like={n_a}, extreme={n_b}, minimum={min_stratum}"
        )
    model_a = fit_linear(train.subset(np.nonzero(mask_a)[0]), "ridge", lam=lam)
    model_b = fit_linear(train.subset(np.nonzero(~mask_a)[0]), "ridge", lam=lam)
    router = fit_linear(train, "ridge", lam=lam) if use_estimate_router else None
    return StratifiedPredictor(
        model_a=model_a,
        model_b=model_b,
        feature_names=list(train.feature_names),
        router_model=router,
    )


def predict_stratified(
    predictor: StratifiedPredictor,
    x: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Route every row to exactly one specialized model.

    Returns (predictions, route labels).
    """
    data = np.asarray(x, dtype=float)
    estimates = (
        predictor.router_model.predict(data) if predictor.router_model is not None else None
    )
    labels = route_rows(data, predictor.feature_names, logp_estimates=estimates)
    predictions = np.empty(data.shape[0])
    mask_a = labels == LABEL_DRUG_LIKE
    if mask_a.any():
        predictions[mask_a] = predictor.model_a.predict(data[mask_a])
    if (~mask_a).any():
        predictions[~mask_a] = predictor.model_b.predict(data[~mask_a])
    return predictions, labels


def routing_disagreement(predictor: StratifiedPredictor, x: np.ndarray) -> float:
    """Fraction of rows routed differently with vs. without the
    provisional logP estimate."""
    if predictor.router_model is None:
        return 0.0
    data = np.asarray(x, dtype=float)
    with_estimate = route_rows(
        data, predictor.feature_names, predictor.router_model.predict(data)
    )
    feature_only = route_rows(data, predictor.feature_names, None)
    return float(np.mean(with_estimate != feature_only))
