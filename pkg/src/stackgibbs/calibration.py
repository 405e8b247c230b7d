"""Probability integral transform and distance of PIT values from uniformity."""

import numpy as np


def pit(pool, y):
    """PIT value ``F(y)`` of a pool (or any object with a ``cdf``)."""
    u = np.asarray(pool.cdf(y), dtype=float)
    u = np.clip(u, 0.0, 1.0)
    return u if u.ndim else float(u)


def _check_pit(values):
    u = np.asarray(values, dtype=float).ravel()
    if u.size == 0:
        raise ValueError("PIT series is empty")
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(u > 1):
        raise ValueError("PIT values must lie in [0, 1]")
    return u


def uwd1(values):
    """1-Wasserstein distance between the PIT sample and Uniform(0, 1).

    Computed on the midpoint grid,
    ``(1/n) sum_i |u_(i) - (2i - 1) / (2n)|`` for sorted values ``u_(i)``.
    """
    u = np.sort(_check_pit(values))
    n = u.size
    grid = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    return float(np.abs(u - grid).mean())


def pit_histogram(values, bins=10):
    """Counts over ``bins`` equal-width bins on [0, 1]; 1.0 falls in the last bin."""
    bins = int(bins)
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    counts, _ = np.histogram(_check_pit(values), bins=bins, range=(0.0, 1.0))
    return counts
