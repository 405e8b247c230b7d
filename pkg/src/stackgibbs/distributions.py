"""Candidate predictive distributions and their linear pools.

Three kinds of component forecast are supported:

* :class:`Gaussian` -- parametric normal forecast,
* :class:`Empirical` -- a sample set, evaluated through a linearly
  interpolated CDF so that PIT values of continuous data stay continuous,
* :class:`PiecewiseCDF` -- a CDF reconstructed from a quantile set, linear
  between knots with exponential tails.

All objects are immutable after construction.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from ._validation import check_random_state, check_simplex

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
TIE_NUDGE = 1e-9


class ComponentForecast:
    """Base class for a single predictive distribution."""

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, n, rng=None):
        """Draw ``n`` i.i.d. values by inverse-CDF sampling."""
        if int(n) < 1:
            raise ValueError(f"n must be >= 1, got {n!r}")
        rng = check_random_state(rng)
        return self.ppf(rng.random(int(n)))

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))


@dataclass(frozen=True)
class Gaussian(ComponentForecast):
    mu: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be > 0, got {self.sigma!r}")

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return -0.5 * z * z - _LOG_SQRT_2PI - np.log(self.sigma)

    def ppf(self, u):
        return self.mu + self.sigma * ndtri(np.asarray(u, dtype=float))

    def sample(self, n, rng=None):
        if int(n) < 1:
            raise ValueError(f"n must be >= 1, got {n!r}")
        rng = check_random_state(rng)
        return rng.normal(self.mu, self.sigma, size=int(n))


@dataclass(frozen=True, eq=False)
class Empirical(ComponentForecast):
    """Sample-set forecast.

    The CDF passes linearly through ``(x_(i), (i - 1) / (n - 1))`` for the
    sorted samples, so it is 0 at the smallest sample and 1 at the largest.
    Densities use a Gaussian kernel estimate with Silverman's bandwidth; the
    derivative of the interpolated CDF is too rough to score with LogS.
    """

    samples: np.ndarray
    _levels: np.ndarray = field(init=False, repr=False)
    _bandwidth: float = field(init=False, repr=False)

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size < 2:
            raise ValueError("empirical forecast needs at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise ValueError("empirical samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        levels = np.linspace(0.0, 1.0, s.size)
        levels.setflags(write=False)
        object.__setattr__(self, "_levels", levels)
        sd = s.std(ddof=1)
        iqr = s[int(0.75 * (s.size - 1))] - s[int(0.25 * (s.size - 1))]
        spread = min(sd, iqr / 1.34) if iqr > 0 else sd
        h = 0.9 * spread * s.size ** (-0.2)
        object.__setattr__(self, "_bandwidth", max(h, 1e-8 * max(1.0, abs(s.mean()))))

    def __len__(self):
        return self.samples.size

    def cdf(self, x):
        return np.interp(x, self.samples, self._levels, left=0.0, right=1.0)

    def ppf(self, u):
        return np.interp(u, self._levels, self.samples)

    def pdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        h = self._bandwidth
        out = np.empty(x.shape)
        for i, xi in enumerate(x.ravel()):
            z = (xi - self.samples) / h
            out.flat[i] = np.exp(-0.5 * z * z).sum()
        out /= self.samples.size * h * np.sqrt(2.0 * np.pi)
        return out if out.size > 1 else out[0]


@dataclass(frozen=True, eq=False)
class PiecewiseCDF(ComponentForecast):
    """CDF through ``(quantiles[k], probs[k])``, linear between knots.

    Below the first knot the CDF is ``p_1 * exp(rate * (x - q_1))`` and above
    the last it is ``1 - (1 - p_K) * exp(-rate * (x - q_K))``.
    """

    probs: np.ndarray
    quantiles: np.ndarray
    tail_rate: float

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel().copy()
        q = np.asarray(self.quantiles, dtype=float).ravel().copy()
        if p.size != q.size:
            raise ValueError(
                f"probs and quantiles differ in length ({p.size} != {q.size})"
            )
        if p.size < 2:
            raise ValueError("need at least 2 (prob, quantile) pairs")
        if np.any(p <= 0) or np.any(p >= 1):
            raise ValueError("probs must lie strictly inside (0, 1)")
        if np.any(np.diff(p) <= 0):
            raise ValueError("probs must be strictly increasing")
        if not np.all(np.isfinite(q)):
            raise ValueError("quantiles must be finite")
        if np.any(np.diff(q) < 0):
            raise ValueError("quantiles must be nondecreasing")
        if not (np.isfinite(self.tail_rate) and self.tail_rate > 0):
            raise ValueError(f"tail_rate must be > 0, got {self.tail_rate!r}")
        # flat stretches get cumulative 1e-9 nudges so the CDF stays invertible
        for k in range(1, q.size):
            if q[k] <= q[k - 1]:
                q[k] = q[k - 1] + TIE_NUDGE
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "quantiles", q)
        object.__setattr__(self, "tail_rate", float(self.tail_rate))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        p, q, rate = self.probs, self.quantiles, self.tail_rate
        mid = np.interp(x, q, p)
        with np.errstate(over="ignore"):
            lower = p[0] * np.exp(np.minimum(rate * (x - q[0]), 0.0))
            upper = 1.0 - (1.0 - p[-1]) * np.exp(np.minimum(-rate * (x - q[-1]), 0.0))
        return np.where(x < q[0], lower, np.where(x > q[-1], upper, mid))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        p, q, rate = self.probs, self.quantiles, self.tail_rate
        slopes = np.diff(p) / np.diff(q)
        k = np.clip(np.searchsorted(q, x, side="right") - 1, 0, slopes.size - 1)
        mid = slopes[k]
        lower = rate * p[0] * np.exp(np.minimum(rate * (x - q[0]), 0.0))
        upper = rate * (1.0 - p[-1]) * np.exp(np.minimum(-rate * (x - q[-1]), 0.0))
        return np.where(x < q[0], lower, np.where(x > q[-1], upper, mid))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        p, q, rate = self.probs, self.quantiles, self.tail_rate
        with np.errstate(divide="ignore", invalid="ignore"):
            lower = q[0] + np.log(u / p[0]) / rate
            upper = q[-1] - np.log((1.0 - u) / (1.0 - p[-1])) / rate
        return np.where(u < p[0], lower, np.where(u > p[-1], upper, np.interp(u, p, q)))


@dataclass(frozen=True)
class LinearPool:
    """Mixture ``sum_c w_c P_c`` of component forecasts."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a linear pool needs at least one component")
        for c in comps:
            if not isinstance(c, ComponentForecast):
                raise TypeError(f"not a ComponentForecast: {c!r}")
        w = check_simplex(self.weights, len(comps))
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.components)

    def cdf(self, x):
        return sum(w * c.cdf(x) for w, c in zip(self.weights, self.components) if w > 0)

    def pdf(self, x):
        return sum(w * c.pdf(x) for w, c in zip(self.weights, self.components) if w > 0)

    def sample(self, n, rng=None):
        rng = check_random_state(rng)
        idx = rng.choice(len(self.components), size=int(n), p=self.weights)
        out = np.empty(int(n))
        for c in np.unique(idx):
            mask = idx == c
            out[mask] = self.components[c].sample(mask.sum(), rng)
        return out


def eval_cdf(f, x):
    """CDF of component forecast ``f`` at ``x``."""
    return f.cdf(x)


def pool_cdf(pool, x):
    """CDF of the linear pool at ``x``."""
    return pool.cdf(x)


def sample(f, n, rng=None):
    """Draw ``n`` i.i.d. values from ``f``; deterministic given ``rng``."""
    return f.sample(n, rng)


def default_tail_rate(quantiles):
    q = np.asarray(quantiles, dtype=float)
    return 1.0 / (q[-1] - q[0] + 1.0)


def quantiles_to_piecewise_cdf(probs, quantiles, tail_rate=None):
    """Reconstruct a continuous distribution from a quantile set.

    Parameters
    ----------
    probs : array_like of shape (K,)
        Strictly increasing probability levels in (0, 1).
    quantiles : array_like of shape (K,)
        Nondecreasing quantile values.
    tail_rate : float, optional
        Exponential tail rate; defaults to ``1 / (q_K - q_1 + 1)``.

    Returns
    -------
    PiecewiseCDF
    """
    if tail_rate is None:
        q = np.asarray(quantiles, dtype=float)
        if q.ndim != 1 or q.size < 2:
            raise ValueError("need at least 2 (prob, quantile) pairs")
        if np.any(np.diff(q) < 0):
            raise ValueError("quantiles must be nondecreasing")
        tail_rate = default_tail_rate(q)
    return PiecewiseCDF(probs, quantiles, tail_rate)
