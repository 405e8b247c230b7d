"""Four one-week-ahead forecasters for weekly epidemic counts.

Each returns an :class:`~stackgibbs.distributions.Empirical` sample set on the
count scale, clamped at zero:

* ``sir`` -- least-squares fit of the deterministic SIR ODE to
  ``log(1 + counts)`` plus Gaussian noise on that scale,
* ``ar1`` -- AR(1) on ``log(1 + counts)``,
* ``rw_drift`` -- random walk with drift on ``log(1 + counts)``,
* ``mean`` -- the historical mean and spread of ``log(1 + counts)``.

Parameter uncertainty is ignored; the predictive spread is the residual
scale, floored at ``MIN_LOG_SD``.
"""

import math

import numba as nb
import numpy as np
from scipy.optimize import least_squares

from .._validation import check_random_state
from ..distributions import Empirical

COMPONENT_NAMES = ("sir", "ar1", "rw_drift", "mean")
MIN_LOG_SD = 0.02
ODE_SUBSTEPS = 10


@nb.njit(cache=True)
def _sir_infected(beta, gamma, i0, population, weeks, substeps):
    """Infected compartment of the SIR ODE at t = 1..weeks (RK4)."""
    out = np.empty(weeks)
    s = population - i0
    i = i0
    h = 1.0 / substeps
    n = population
    for week in range(weeks):
        for _ in range(substeps):
            ds1 = -beta * s * i / n
            di1 = -ds1 - gamma * i
            s2, i2 = s + 0.5 * h * ds1, i + 0.5 * h * di1
            ds2 = -beta * s2 * i2 / n
            di2 = -ds2 - gamma * i2
            s3, i3 = s + 0.5 * h * ds2, i + 0.5 * h * di2
            ds3 = -beta * s3 * i3 / n
            di3 = -ds3 - gamma * i3
            s4, i4 = s + h * ds3, i + h * di3
            ds4 = -beta * s4 * i4 / n
            di4 = -ds4 - gamma * i4
            s += h * (ds1 + 2.0 * ds2 + 2.0 * ds3 + ds4) / 6.0
            i += h * (di1 + 2.0 * di2 + 2.0 * di3 + di4) / 6.0
            if s < 0.0:
                s = 0.0
            if i < 0.0:
                i = 0.0
        out[week] = i
    return out


def _fit_sir(x, population):
    """Least-squares (beta, gamma, i0) on the log1p scale; returns (forecast, residual sd)."""
    w = x.size
    k = min(4, w)
    growth = (x[-1] - x[-k]) / (k - 1)
    lo = np.log([1e-3, 1e-3, 1e-2])
    hi = np.log([20.0, 10.0, float(population)])

    def residuals(theta):
        beta, gamma, i0 = np.exp(theta)
        return np.log1p(_sir_infected(beta, gamma, i0, float(population), w, ODE_SUBSTEPS)) - x

    best = None
    for gamma0 in (0.2, 0.5):
        beta0 = max(gamma0 + growth, 0.05)
        i00 = min(max(np.expm1(x[0]) * math.exp(-growth), 1.0), 0.5 * population)
        start = np.clip(np.log([beta0, gamma0, i00]), lo + 1e-9, hi - 1e-9)
        fit = least_squares(residuals, start, bounds=(lo, hi), x_scale=1.0)
        if best is None or fit.cost < best.cost:
            best = fit
    beta, gamma, i0 = np.exp(best.x)
    path = _sir_infected(beta, gamma, i0, float(population), w + 1, ODE_SUBSTEPS)
    sd = np.sqrt(2.0 * best.cost / max(w - 3, 1))
    return np.log1p(path[-1]), sd


def _ar1(x):
    prev, nxt = x[:-1], x[1:]
    if np.ptp(prev) == 0:
        return x[-1], 0.0
    phi, c = np.polyfit(prev, nxt, 1)
    resid = nxt - (c + phi * prev)
    sd = np.sqrt(resid @ resid / max(resid.size - 2, 1))
    return c + phi * x[-1], sd


def _rw_drift(x):
    steps = np.diff(x)
    return x[-1] + steps.mean(), steps.std(ddof=1)


def _mean_model(x):
    return x.mean(), x.std(ddof=1)


def fit_sir_components(history, population, rng=None, n_samples=10_000):
    """Four one-step-ahead forecasts of the next weekly count.

    Parameters
    ----------
    history : array_like of shape (w,)
        Observed weekly counts, oldest first; needs ``w >= 4``.
    population : int
    rng : seed or Generator
    n_samples : int

    Returns
    -------
    list of Empirical
        In the order of ``COMPONENT_NAMES``.
    """
    y = np.asarray(history, dtype=float).ravel()
    if y.size < 4:
        raise ValueError(f"need at least 4 weeks of history, got {y.size}")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError("counts must be finite and nonnegative")
    rng = check_random_state(rng)
    x = np.log1p(y)
    out = []
    for fit in (lambda v: _fit_sir(v, population), _ar1, _rw_drift, _mean_model):
        loc, sd = fit(x)
        sd = max(float(sd), MIN_LOG_SD)
        draws = np.expm1(loc + sd * rng.standard_normal(int(n_samples)))
        out.append(Empirical(np.maximum(draws, 0.0)))
    return out
