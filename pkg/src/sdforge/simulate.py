"""Documented synthetic data generators for benchmarks and calibration.

Every generator is a pure function of (sizes, seed) and states its
generative formula, so tests can recompute expected values from the
ground truth instead of trusting the code under test.
"""

from __future__ import annotations

import numpy as np

HETERO_FEATURES = ["f_linear", "f_curved", "f_drift", "f_noise_a", "f_level"]


def heteroskedastic_nonlinear(
    n: int,
    seed: int,
    hetero: float = 0.7,
    noise_scale: float = 0.25,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nonlinear truth with variance growing away from the median.

    Features: x1 ~ N(0,1); x2 ~ Exp(1) (right-skewed, so the squared
    term is monotone on its support); x3 ~ U(0,2); x4 ~ N(0,1);
    x5 ~ integer 0..3.

    Truth:  f = 1.2 x1 + 1.8 x2^2 + 0.7 x3 - 0.5 x4 + 0.3 x5
    Noise:  y = f + noise_scale * (1 + hetero * |f - median(f)|) * eps

    A linear fit cannot absorb the x2^2 term, and the noise scale grows
    with distance from the median response, so residual spread rises
    along the prediction range.  Returns (X, y, f).
    """
    rng = np.random.default_rng(seed)
    x = np.column_stack(
        [
            rng.normal(size=n),
            rng.exponential(scale=1.0, size=n),
            rng.uniform(0.0, 2.0, size=n),
            rng.normal(size=n),
            rng.integers(0, 4, size=n).astype(float),
        ]
    )
    f = 1.2 * x[:, 0] + 1.8 * x[:, 1] ** 2 + 0.7 * x[:, 2] - 0.5 * x[:, 3] + 0.3 * x[:, 4]
    sigma = noise_scale * (1.0 + hetero * np.abs(f - np.median(f)))
    y = f + sigma * rng.normal(size=n)
    return x, y, f


def suppression_scenario(
    n: int,
    seed: int,
    rho: float = 0.7,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Correlated pair with opposite-signed effects plus one clean feature.

    x1 and x2 are standard normal with correlation ``rho``; x3 is
    independent.  y = 1.0 x1 - 1.2 x2 + 0.5 x3 + 0.3 eps.  The positive
    x1 effect is mostly cancelled in bivariate correlation by the
    negative, correlated x2 effect (cov(x1, y) = 1 - 1.2 rho), while the
    conditional effect of x1 stays large.  Returns (X, y, true_coefs).
    """
    rng = np.random.default_rng(seed)
    z1 = rng.normal(size=n)
    z2 = rho * z1 + np.sqrt(1.0 - rho**2) * rng.normal(size=n)
    x3 = rng.normal(size=n)
    x = np.column_stack([z1, z2, x3])
    coefs = np.array([1.0, -1.2, 0.5])
    y = x @ coefs + 0.3 * rng.normal(size=n)
    return x, y, coefs


def homoskedastic_linear(n: int, seed: int, p: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Plain linear data with constant unit-free noise: y = 1 + sum(x) + eps/2."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    y = 1.0 + x.sum(axis=1) + 0.5 * rng.normal(size=n)
    return x, y


def variance_proportional_to_x_squared(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """y = 1 + 2x + |x| eps: residual variance proportional to x^2."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    y = 1.0 + 2.0 * x + np.abs(x) * rng.normal(size=n)
    return x[:, None], y
