"""Yeo-Johnson power transform for the regression target.

The transform is strictly increasing for every power parameter, defined
on all reals, and exactly invertible, which is what lets a linear model
fit in transformed space and still predict in original units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class YeoJohnson:
    lam: float
    log_likelihood: float = math.nan

    def apply(self, y: np.ndarray) -> np.ndarray:
        arr = np.asarray(y, dtype=float)
        out = np.empty_like(arr)
        lam = self.lam
        pos = arr >= 0
        if abs(lam) > 1e-12:
            out[pos] = (np.power(arr[pos] + 1.0, lam) - 1.0) / lam
        else:
            out[pos] = np.log1p(arr[pos])
        neg = ~pos
        if abs(lam - 2.0) > 1e-12:
            out[neg] = -(np.power(1.0 - arr[neg], 2.0 - lam) - 1.0) / (2.0 - lam)
        else:
            out[neg] = -np.log1p(-arr[neg])
        return out

    def invert(self, z: np.ndarray) -> np.ndarray:
        arr = np.asarray(z, dtype=float)
        out = np.empty_like(arr)
        lam = self.lam
        pos = arr >= 0
        if abs(lam) > 1e-12:
            out[pos] = np.power(arr[pos] * lam + 1.0, 1.0 / lam) - 1.0
        else:
            out[pos] = np.expm1(arr[pos])
        neg = ~pos
        if abs(lam - 2.0) > 1e-12:
            out[neg] = 1.0 - np.power(1.0 - (2.0 - lam) * arr[neg], 1.0 / (2.0 - lam))
        else:
            out[neg] = -np.expm1(-arr[neg])
        return out


def _profile_log_likelihood(y: np.ndarray, lam: float) -> float:
    z = YeoJohnson(lam).apply(y)
    var = float(np.mean((z - z.mean()) ** 2))
    if var <= 0.0:
        return -math.inf
    jacobian = float(np.sum(np.sign(y) * np.log1p(np.abs(y))))
    return -0.5 * y.size * math.log(var) + (lam - 1.0) * jacobian


def yeo_johnson_fit(
    y: np.ndarray,
    lower: float = -5.0,
    upper: float = 5.0,
    tol: float = 1e-6,
) -> YeoJohnson:
    """Pick the power parameter by golden-section search on the profile
    log-likelihood over [lower, upper]."""
    arr = np.asarray(y, dtype=float)
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lower, upper
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _profile_log_likelihood(arr, c)
    fd = _profile_log_likelihood(arr, d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _profile_log_likelihood(arr, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _profile_log_likelihood(arr, d)
    lam = (a + b) / 2.0
    return YeoJohnson(lam=lam, log_likelihood=_profile_log_likelihood(arr, lam))
