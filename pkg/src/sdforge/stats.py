"""Exploratory statistics and regression diagnostics.

Numeric conventions, pinned because downstream counts depend on them:
quartiles use linear interpolation (the "type 7" rule); skewness and
excess kurtosis use population moments; chi-square tail probabilities
come from the regularized upper incomplete gamma function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class ColumnSummary:
    mean: float
    median: float
    std_dev: float
    min: float
    max: float
    iqr: float
    skewness: float
    excess_kurtosis: float


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution."""
    return float(special.gammaincc(df / 2.0, x / 2.0))


def summarize(column: np.ndarray) -> ColumnSummary:
    """Location, spread, and shape of one column.

    ``std_dev`` is the sample standard deviation; skewness m3/m2^1.5 and
    excess kurtosis m4/m2^2 - 3 use population (biased) moments.
    """
    x = np.asarray(column, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 observations")
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    q1, q3 = np.percentile(x, [25, 75])
    if m2 > 0:
        skewness = m3 / m2**1.5
        kurtosis = m4 / m2**2 - 3.0
    else:
        skewness = 0.0
        kurtosis = 0.0
    return ColumnSummary(
        mean=float(x.mean()),
        median=float(np.median(x)),
        std_dev=float(x.std(ddof=1)),
        min=float(x.min()),
        max=float(x.max()),
        iqr=float(q3 - q1),
        skewness=skewness,
        excess_kurtosis=kurtosis,
    )


def pearson_matrix(columns: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Pairwise correlations with two-sided p-values.

    ``columns`` is n x p.  Returns (r, p, flagged) where flagged lists
    zero-variance column indices; their r/p entries are NaN rather than
    silently zero.  P-values use the t transform with n - 2 degrees of
    freedom.
    """
    data = np.asarray(columns, dtype=float)
    n, p = data.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    stds = data.std(axis=0, ddof=0)
    flagged = [j for j in range(p) if stds[j] == 0.0]
    centered = data - data.mean(axis=0)
    safe = np.where(stds > 0, stds, 1.0)
    z = centered / safe
    r = (z.T @ z) / n
    r = np.clip(r, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    for j in flagged:
        r[j, :] = np.nan
        r[:, j] = np.nan

    df = n - 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = r * np.sqrt(df / np.maximum(1.0 - r**2, 1e-300))
    pvals = np.empty_like(r)
    for i in range(p):
        for j in range(p):
            if np.isnan(r[i, j]):
                pvals[i, j] = np.nan
            elif abs(r[i, j]) >= 1.0:
                pvals[i, j] = 0.0
            else:
                pvals[i, j] = 2.0 * float(special.stdtr(df, -abs(t[i, j])))
    np.fill_diagonal(pvals, 0.0)
    return r, pvals, flagged


def _ols_r2(y: np.ndarray, design: np.ndarray) -> float:
    """R-squared of y on a design matrix that already includes any intercept."""
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        return 0.0
    return 1.0 - float(np.sum(resid**2)) / sst


def vif(features: np.ndarray) -> np.ndarray:
    """Variance inflation factor per feature: 1 / (1 - R^2_j).

    R^2_j comes from regressing feature j on all the others plus an
    intercept.  Exact linear dependence reports as infinity.
    """
    x = np.asarray(features, dtype=float)
    n, p = x.shape
    if p < 2:
        raise ValueError("need at least 2 features")
    if n <= p:
        raise ValueError("need more rows than features")
    out = np.empty(p)
    ones = np.ones((n, 1))
    for j in range(p):
        others = np.hstack([ones, np.delete(x, j, axis=1)])
        r2 = _ols_r2(x[:, j], others)
        out[j] = math.inf if 1.0 - r2 < 1e-12 else 1.0 / (1.0 - r2)
    return out


def iqr_outliers(column: np.ndarray) -> tuple[np.ndarray, tuple[float, float]]:
    """Indices strictly outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR], plus the bounds."""
    x = np.asarray(column, dtype=float)
    if x.size < 4:
        raise ValueError("need at least 4 observations")
    q1, q3 = np.percentile(x, [25, 75])
    spread = q3 - q1
    lower, upper = q1 - 1.5 * spread, q3 + 1.5 * spread
    idx = np.nonzero((x < lower) | (x > upper))[0]
    return idx, (float(lower), float(upper))


def dagostino_k2(column: np.ndarray) -> tuple[float, float]:
    """D'Agostino-Pearson omnibus normality statistic and chi-square(2) p."""
    x = np.asarray(column, dtype=float)
    n = x.size
    if n < 20:
        raise ValueError("omnibus test needs n >= 20")
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        raise ValueError("zero variance")
    b1 = float(np.mean(centered**3)) / m2**1.5
    b2 = float(np.mean(centered**4)) / m2**2

    # skewness transform (D'Agostino 1970)
    y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = 3.0 * (n**2 + 27 * n - 70) * (n + 1) * (n + 3) / ((n - 2) * (n + 5) * (n + 7) * (n + 9))
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(math.log(math.sqrt(w2)))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    z1 = delta * math.asinh(y / alpha)

    # kurtosis transform (Anscombe & Glynn 1983)
    mean_b2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1) ** 2 * (n + 3) * (n + 5))
    xx = (b2 - mean_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0
        * (n**2 - 5 * n + 2)
        / ((n + 7) * (n + 9))
        * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2))
    term = (1.0 - 2.0 / a) / (1.0 + xx * math.sqrt(2.0 / (a - 4.0)))
    z2 = ((1.0 - 2.0 / (9.0 * a)) - math.copysign(abs(term) ** (1.0 / 3.0), term)) / math.sqrt(
        2.0 / (9.0 * a)
    )

    k2 = z1**2 + z2**2
    return k2, chi2_sf(k2, 2)


def normality_test(
    column: np.ndarray,
    subsample: int = 5000,
    seed: int = 0,
) -> tuple[float, float]:
    """Omnibus normality test on a seeded random subsample.

    Subsampling keeps the test's power calibrated for very large columns
    where even trivial departures reject.  Returns (statistic, p_value).
    """
    if subsample < 20:
        raise ValueError("subsample must be at least 20")
    x = np.asarray(column, dtype=float)
    if x.size > subsample:
        rng = np.random.default_rng(seed)
        x = x[rng.choice(x.size, size=subsample, replace=False)]
    return dagostino_k2(x)


@dataclass(frozen=True)
class BreuschPaganResult:
    lm_statistic: float
    degrees_of_freedom: int
    p_value: float


def breusch_pagan(residuals: np.ndarray, regressors: np.ndarray) -> BreuschPaganResult:
    """Lagrange-multiplier test for variance depending on the regressors.

    Squared residuals are regressed (with intercept) on the regressors;
    LM = n * R^2 of that auxiliary fit, referred to chi-square with one
    degree of freedom per regressor.
    """
    e = np.asarray(residuals, dtype=float)
    z = np.asarray(regressors, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    n, k = z.shape
    if e.shape[0] != n:
        raise ValueError("residuals and regressors disagree on n")
    if n <= k + 1:
        raise ValueError("need n > number of regressors + 1")
    design = np.hstack([np.ones((n, 1)), z])
    r2_aux = _ols_r2(e**2, design)
    lm = n * r2_aux
    return BreuschPaganResult(lm_statistic=lm, degrees_of_freedom=k, p_value=chi2_sf(lm, k))


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Fine for the single-digit dimensions used here.  Returns
    (eigenvalues, eigenvectors) sorted descending by eigenvalue;
    eigenvectors are columns.
    """
    a = np.array(matrix, dtype=float, copy=True)
    p = a.shape[0]
    v = np.eye(p)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                if abs(a[i, j]) < 1e-300:
                    continue
                theta = 0.5 * math.atan2(2.0 * a[i, j], a[i, i] - a[j, j])
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(p)
                rot[i, i] = c
                rot[j, j] = c
                rot[i, j] = -s
                rot[j, i] = s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a))[::-1]
    return np.diag(a)[order], v[:, order]


@dataclass(frozen=True)
class PcaResult:
    loadings: np.ndarray  # k x p, rows orthonormal
    explained_variance_ratio: np.ndarray
    projected: np.ndarray  # n x k


def pca(features: np.ndarray, k: int) -> PcaResult:
    """Principal components of the correlation matrix.

    Columns are standardized first, so the decomposition is of the
    correlation matrix.  Sign convention: in each loading vector, the
    largest-magnitude element is positive.
    """
    x = np.asarray(features, dtype=float)
    n, p = x.shape
    if k > p:
        raise ValueError(f"k={k} exceeds feature count {p}")
    stds = x.std(axis=0, ddof=0)
    if np.any(stds == 0):
        raise ValueError("constant column; standardization undefined")
    z = (x - x.mean(axis=0)) / stds
    corr = (z.T @ z) / n
    eigenvalues, eigenvectors = jacobi_eigh(corr)
    eigenvalues = np.maximum(eigenvalues, 0.0)
    ratios = eigenvalues / eigenvalues.sum()
    loadings = eigenvectors[:, :k].T.copy()
    for row in loadings:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaResult(
        loadings=loadings,
        explained_variance_ratio=ratios[:k].copy(),
        projected=z @ loadings.T,
    )
