"""Regularized linear regression with a uniform prediction contract.

One objective family covers all three penalties:

    (1/(2n)) * sum_i w_i (y_i - x_i . beta - b)^2
        + lam * ( r * ||beta||_1  +  (1 - r)/2 * ||beta||_2^2 )

with mixing ratio r = 0 for ridge, r = 1 for lasso, and r = l1_ratio in
between.  The intercept b is never penalized.  Features are standardized
internally (scaler fit on the training data only), and an optional
target transform is applied before fitting and inverted at prediction
time.  Under this normalization the lasso null threshold is
max|X'y|/n and the elastic-net endpoints coincide exactly with ridge
and lasso at the same lam.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError
from .data import Dataset, Scaler
from .power import YeoJohnson

log = logging.getLogger(__name__)

PENALTIES = ("ridge", "lasso", "elasticnet")

WLS_EPS = 1e-8


@dataclass
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    penalty: str
    lam: float
    l1_ratio: float
    scaler: Scaler
    feature_names: list[str]
    transform: YeoJohnson | None = None
    weighted: bool = False

    def linear_predictor(self, x: np.ndarray) -> np.ndarray:
        """Model output in (possibly transformed) target space."""
        z = self.scaler.transform(x)
        return self.intercept + z @ self.coefficients

    def predict(self, x: np.ndarray) -> np.ndarray:
        raw = self.linear_predictor(x)
        if self.transform is not None:
            raw = self.transform.invert(raw)
        return raw


def _effective_l1_ratio(penalty: str, l1_ratio: float | None) -> float:
    if penalty == "ridge":
        return 0.0
    if penalty == "lasso":
        return 1.0
    if penalty == "elasticnet":
        if l1_ratio is None or not 0.0 <= l1_ratio <= 1.0:
            raise ValueError("elasticnet requires l1_ratio in [0, 1]")
        return l1_ratio
    raise ValueError(f"unknown penalty {penalty!r}; expected one of {PENALTIES}")


def _solve_ridge(
    z: np.ndarray,
    y: np.ndarray,
    lam: float,
    weights: np.ndarray | None,
) -> tuple[np.ndarray, float]:
    """Closed-form weighted ridge with unpenalized intercept.

    Normal equations on the n-normalized Gram matrix with lam added to
    the identity (intercept row excluded).
    """
    n = z.shape[0]
    design = np.hstack([np.ones((n, 1)), z])
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    gram = (design.T * w) @ design / n
    rhs = (design.T * w) @ y / n
    penalty = lam * np.eye(design.shape[1])
    penalty[0, 0] = 0.0
    theta = np.linalg.solve(gram + penalty, rhs)
    return theta[1:], float(theta[0])


def _coordinate_descent(
    z: np.ndarray,
    y_centered: np.ndarray,
    lam: float,
    l1_ratio: float,
    tolerance: float,
    max_iters: int,
) -> np.ndarray:
    """Cyclic coordinate descent with soft-thresholding."""
    n, p = z.shape
    col_sq = np.mean(z**2, axis=0)
    beta = np.zeros(p)
    residual = y_centered.copy()
    l1 = lam * l1_ratio
    l2 = lam * (1.0 - l1_ratio)
    for _ in range(max_iters):
        max_delta = 0.0
        for j in range(p):
            old = beta[j]
            rho = col_sq[j] * old + float(z[:, j] @ residual) / n
            if rho > l1:
                new = (rho - l1) / (col_sq[j] + l2)
            elif rho < -l1:
                new = (rho + l1) / (col_sq[j] + l2)
            else:
                new = 0.0
            if new != old:
                residual += z[:, j] * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tolerance:
            return beta
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_iters} sweeps",
        last_iterate=beta,
    )


def fit_linear(
    train: Dataset,
    penalty: str,
    lam: float,
    l1_ratio: float | None = None,
    tolerance: float = 1e-7,
    max_iters: int = 10_000,
    transform: YeoJohnson | None = None,
    weights: np.ndarray | None = None,
) -> LinearModel:
    """Fit ridge (closed form) or lasso/elastic-net (coordinate descent).

    Weights are only supported for the ridge path.  Raises
    :class:`ConvergenceError` (with the last iterate attached) if
    coordinate descent exhausts ``max_iters`` sweeps.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    ratio = _effective_l1_ratio(penalty, l1_ratio)
    scaler = Scaler.fit(train.x)
    z = scaler.transform(train.x)
    y = transform.apply(train.y) if transform is not None else train.y

    if ratio == 0.0:
        coef, intercept = _solve_ridge(z, y, lam, weights)
    else:
        if weights is not None:
            raise ValueError("observation weights are only supported with the ridge penalty")
        intercept = float(y.mean())
        coef = _coordinate_descent(z, y - intercept, lam, ratio, tolerance, max_iters)

    return LinearModel(
        coefficients=coef,
        intercept=intercept,
        penalty=penalty,
        lam=lam,
        l1_ratio=ratio,
        scaler=scaler,
        feature_names=list(train.feature_names),
        transform=transform,
        weighted=weights is not None,
    )


def lasso_lambda_max(train: Dataset, transform: YeoJohnson | None = None) -> float:
    """Smallest penalty at which the lasso solution is exactly zero."""
    scaler = Scaler.fit(train.x)
    z = scaler.transform(train.x)
    y = transform.apply(train.y) if transform is not None else train.y
    y_centered = y - y.mean()
    return float(np.max(np.abs(z.T @ y_centered))) / train.n


def fit_wls(train: Dataset, base: LinearModel) -> LinearModel:
    """Reweighted ridge: weights from a log-linear variance model.

    The base model's squared residuals (in its target space) are
    regressed on its predictions; fitted log-variances become inverse
    weights, normalized to mean 1 so the penalty keeps its meaning.
    Falls back to the unweighted fit (with a warning) when the variance
    model is degenerate.
    """
    if base.penalty != "ridge":
        raise ValueError("weighted refit is defined for ridge base models")
    linpred = base.linear_predictor(train.x)
    y = base.transform.apply(train.y) if base.transform is not None else train.y
    residuals = y - linpred
    log_sq = np.log(residuals**2 + WLS_EPS)

    spread = float(np.var(linpred))
    if spread < 1e-12:
        log.warning("variance model degenerate (constant predictions); keeping unweighted fit")
        weights = None
    else:
        design = np.column_stack([np.ones(train.n), linpred])
        gamma, *_ = np.linalg.lstsq(design, log_sq, rcond=None)
        fitted_log_var = design @ gamma
        weights = 1.0 / np.maximum(WLS_EPS, np.exp(fitted_log_var))
        weights /= weights.mean()

    model = fit_linear(
        train,
        penalty="ridge",
        lam=base.lam,
        transform=base.transform,
        weights=weights,
    )
    return model
