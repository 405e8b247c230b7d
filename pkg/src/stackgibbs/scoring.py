"""Proper scoring rules: CRPS (closed form, sample based, numeric), LogS, IS, WIS.

The CRPS of a linear pool is linear-plus-quadratic in the weights::

    CRPS(sum_c w_c P_c, y) = sum_c w_c E|X_c - y| - 1/2 sum_{c,d} w_c w_d E|X_c - X_d|

:class:`MixtureCrpsTerms` stores the two expectation blocks so that many
candidate weight vectors can be scored for the cost of a quadratic form.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ._validation import check_random_state, check_simplex

_SQRT_2PI = np.sqrt(2.0 * np.pi)
LOGS_CAP = 35.0


def _abs_normal_mean(m, s):
    """E|m + s Z| for standard normal Z (the A-function of the mixture CRPS)."""
    m = np.asarray(m, dtype=float)
    s = np.asarray(s, dtype=float)
    z = m / s
    return m * (2.0 * ndtr(z) - 1.0) + 2.0 * s * np.exp(-0.5 * z * z) / _SQRT_2PI


def crps_normal(mu, sigma, y):
    """Closed-form CRPS of N(mu, sigma^2) at ``y``."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("sigma must be > 0")
    z = (np.asarray(y, dtype=float) - mu) / sigma
    return sigma * (
        z * (2.0 * ndtr(z) - 1.0) + 2.0 * np.exp(-0.5 * z * z) / _SQRT_2PI - 1.0 / np.sqrt(np.pi)
    )


@dataclass(frozen=True)
class MixtureCrpsTerms:
    """Expectation blocks of the pooled CRPS for one observation.

    Attributes
    ----------
    abs_to_obs : ndarray of shape (C,)
        Estimates of ``E|X_c - y|``.
    cross_abs : ndarray of shape (C, C)
        Symmetric estimates of ``E|X_c - X_d|``.
    """

    abs_to_obs: np.ndarray
    cross_abs: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.abs_to_obs, dtype=float)
        b = np.asarray(self.cross_abs, dtype=float)
        if a.ndim != 1 or b.shape != (a.size, a.size):
            raise ValueError(f"shape mismatch: abs_to_obs {a.shape}, cross_abs {b.shape}")
        if np.any(b < 0) or np.any(a < 0):
            raise ValueError("expected absolute differences must be nonnegative")
        b = 0.5 * (b + b.T)
        object.__setattr__(self, "abs_to_obs", a)
        object.__setattr__(self, "cross_abs", b)

    def crps(self, w):
        w = np.asarray(w, dtype=float)
        return w @ self.abs_to_obs - 0.5 * w @ self.cross_abs @ w

    def component_crps(self):
        return self.abs_to_obs - 0.5 * np.diag(self.cross_abs)


def normal_crps_terms(mus, sigmas, y):
    """Exact :class:`MixtureCrpsTerms` for Gaussian components."""
    mus, sigmas = _check_normal_params(mus, sigmas)
    a = _abs_normal_mean(y - mus, sigmas)
    var = sigmas ** 2
    b = _abs_normal_mean(mus[:, None] - mus[None, :], np.sqrt(var[:, None] + var[None, :]))
    return MixtureCrpsTerms(a, b)


def _check_normal_params(mus, sigmas):
    mus = np.atleast_1d(np.asarray(mus, dtype=float))
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
    if mus.shape != sigmas.shape or mus.ndim != 1:
        raise ValueError(f"mus {mus.shape} and sigmas {sigmas.shape} must be equal-length 1-d")
    if np.any(~(sigmas > 0)):
        raise ValueError("sigmas must be > 0")
    return mus, sigmas


def crps_normal_mixture(mus, sigmas, w, y):
    """Closed-form CRPS of a Gaussian mixture at ``y``."""
    mus, _ = _check_normal_params(mus, sigmas)
    w = check_simplex(w, mus.size)
    return float(normal_crps_terms(mus, sigmas, y).crps(w))


def _mean_abs_to_point(sorted_x, y):
    """Mean of |x_i - y| for sorted ``x``, in O(log n) after a cumsum."""
    n = sorted_x.size
    k = np.searchsorted(sorted_x, y, side="right")
    csum = np.concatenate(([0.0], np.cumsum(sorted_x)))
    below = y * k - csum[k]
    above = (csum[n] - csum[k]) - y * (n - k)
    return (below + above) / n


def _mean_abs_all_pairs(a_sorted, b_sorted):
    """Mean of |a_i - b_j| over every pair, via sorting and prefix sums."""
    m = b_sorted.size
    k = np.searchsorted(b_sorted, a_sorted, side="right")
    csum = np.concatenate(([0.0], np.cumsum(b_sorted)))
    total = a_sorted * (2 * k - m) - 2.0 * csum[k] + csum[m]
    return total.sum() / (a_sorted.size * m)


def _check_samples(component_samples):
    if len(component_samples) == 0:
        raise ValueError("component_samples is empty")
    out = []
    for s in component_samples:
        s = np.asarray(s, dtype=float).ravel()
        if s.size < 2:
            raise ValueError("each component needs at least 2 samples")
        out.append(s)
    return out


def cross_abs_matrix(component_samples, rng=None, pairing="permutation"):
    """Estimate ``E|X_c - X_d|`` for every pair of sampled components.

    Parameters
    ----------
    component_samples : sequence of array_like
        One sample array per component.
    rng : seed or Generator
        Drives the permutations (``pairing="permutation"`` only).
    pairing : {"permutation", "all"}
        ``"permutation"`` pairs one independent shuffle of each array (n pairs,
        unbiased); diagonal terms pair a shuffle with its own rotation so no
        draw meets itself. ``"all"`` averages over all n*m pairs; that is the
        exact CRPS geometry of the empirical pool.
    """
    samples = _check_samples(component_samples)
    C = len(samples)
    out = np.zeros((C, C))
    if pairing == "all":
        srt = [np.sort(s) for s in samples]
        for c in range(C):
            for d in range(c, C):
                out[c, d] = out[d, c] = _mean_abs_all_pairs(srt[c], srt[d])
        return out
    if pairing != "permutation":
        raise ValueError(f"unknown pairing {pairing!r}")
    rng = check_random_state(rng)
    shuffled = [s[rng.permutation(s.size)] for s in samples]
    for c in range(C):
        x = shuffled[c]
        out[c, c] = np.abs(x - np.roll(x, 1)).mean()
        for d in range(c + 1, C):
            n = min(x.size, shuffled[d].size)
            out[c, d] = out[d, c] = np.abs(x[:n] - shuffled[d][:n]).mean()
    return out


def sample_crps_terms(component_samples, y, rng=None, pairing="permutation", cross_abs=None):
    """:class:`MixtureCrpsTerms` estimated from component samples."""
    samples = _check_samples(component_samples)
    a = np.array([_mean_abs_to_point(np.sort(s), float(y)) for s in samples])
    if cross_abs is None:
        cross_abs = cross_abs_matrix(samples, rng, pairing)
    return MixtureCrpsTerms(a, cross_abs)


def crps_mixture_mc(component_samples, w, y, rng=None, pairing="permutation", cross_abs=None):
    """Sample-based CRPS of the linear pool with weights ``w`` at ``y``.

    Pass a precomputed ``cross_abs`` (see :func:`cross_abs_matrix`) to score
    many weight vectors or observations against the same sample sets.
    """
    samples = _check_samples(component_samples)
    w = check_simplex(w, len(samples))
    terms = sample_crps_terms(samples, y, rng, pairing, cross_abs)
    return max(float(terms.crps(w)), 0.0)


def crps_numeric(cdf, y, lo, hi, n_grid=100_000):
    """Trapezoidal CRPS integral on ``[lo, hi]``, split at ``y``.

    The integrand jumps at ``y``; splitting there keeps the rule second order.
    The left piece evaluates the CDF just below ``y``.
    """
    y, lo, hi = float(y), float(lo), float(hi)
    if not lo < y < hi:
        raise ValueError(f"need lo < y < hi, got lo={lo}, y={y}, hi={hi}")
    if n_grid < 1000:
        raise ValueError(f"n_grid must be >= 1000, got {n_grid}")
    if cdf(lo) >= 1e-8 or 1.0 - cdf(hi) >= 1e-8:
        raise ValueError("integration bounds too tight: CDF mass outside [lo, hi] exceeds 1e-8")
    n_left = max(2, int(round(n_grid * (y - lo) / (hi - lo))))
    n_right = max(2, n_grid - n_left)
    xl = np.linspace(lo, y, n_left)
    xl[-1] = np.nextafter(y, -np.inf)
    xr = np.linspace(y, hi, n_right)
    left = np.asarray(cdf(xl), dtype=float) ** 2
    right = (1.0 - np.asarray(cdf(xr), dtype=float)) ** 2
    hl = (y - lo) / (n_left - 1)
    hr = (hi - y) / (n_right - 1)
    total = hl * (left.sum() - 0.5 * (left[0] + left[-1]))
    total += hr * (right.sum() - 0.5 * (right[0] + right[-1]))
    return max(float(total), 0.0)


def log_score(pdf_at_y, cap=LOGS_CAP):
    """Negative log density, capped at ``cap`` (``None`` disables the cap)."""
    p = np.asarray(pdf_at_y, dtype=float)
    if np.any(p < 0):
        raise ValueError("density must be nonnegative")
    with np.errstate(divide="ignore"):
        s = -np.log(p)
    if cap is not None:
        s = np.minimum(s, cap)
    return s if s.ndim else float(s)


def interval_score(l, r, alpha, y):
    """Interval score of the central (1 - alpha) interval ``[l, r]``."""
    l = np.asarray(l, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(l > r):
        raise ValueError("lower bound exceeds upper bound")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    y = np.asarray(y, dtype=float)
    s = (r - l) + (2.0 / alpha) * np.clip(l - y, 0.0, None) + (2.0 / alpha) * np.clip(y - r, 0.0, None)
    return s if s.ndim else float(s)


@dataclass(frozen=True)
class QuantileForecast:
    """Quantile-format forecast with a probability set symmetric about 0.5."""

    probs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if p.size != v.size:
            raise ValueError("probs and values must have equal length")
        order = np.argsort(p)
        p, v = p[order], v[order]
        if np.any(np.diff(p) <= 0) or p[0] <= 0 or p[-1] >= 1:
            raise ValueError("probs must be distinct and inside (0, 1)")
        if np.any(np.diff(v) < 0):
            raise ValueError("quantile values must be nondecreasing in prob")
        if not np.any(np.isclose(p, 0.5, atol=1e-9)):
            raise ValueError("probability set has no median (0.5)")
        if not np.allclose(p + p[::-1], 1.0, atol=1e-9):
            raise ValueError("probability set is not symmetric about 0.5")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "values", v)

    @property
    def median(self):
        return float(self.values[np.argmin(np.abs(self.probs - 0.5))])

    @property
    def intervals(self):
        """List of ``(alpha, lower, upper)``, widest interval first."""
        K = self.probs.size
        return [
            (2.0 * self.probs[k], float(self.values[k]), float(self.values[K - 1 - k]))
            for k in range(K // 2)
        ]


def weighted_interval_score(qf, y):
    """Weighted interval score with weights 1/2 (median) and alpha/2."""
    intervals = qf.intervals
    total = 0.5 * abs(y - qf.median)
    for alpha, lo, hi in intervals:
        total += 0.5 * alpha * interval_score(lo, hi, alpha, y)
    return float(total / (len(intervals) + 0.5))
