"""Data generators for the simulation studies."""

import numpy as np

from .._validation import check_random_state


def _mixture_draws(weights, means, sds, n, rng):
    comp = rng.choice(len(means), size=n, p=weights)
    return rng.normal(np.asarray(means)[comp], np.asarray(sds)[comp])


def gen_iid_mixture(cfg, n, rng=None):
    """``n`` i.i.d. draws from ``nu N(m1, s1^2) + (1 - nu) N(m2, s2^2)``."""
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = check_random_state(rng)
    return _mixture_draws([cfg.nu, 1.0 - cfg.nu], cfg.comp_means, cfg.comp_sds, n, rng)


def gen_dynamic_mixture(cfg, rng=None):
    """Observations whose mixture weights follow a softmax Gaussian random walk.

    Returns
    -------
    y : ndarray of shape (T,)
    weights : ndarray of shape (T, 2)
        Row ``t`` is the mixture weight vector that generated ``y[t]``; the
        first row equals ``w_init``.
    """
    rng = check_random_state(rng)
    T = int(cfg.T)
    z0 = np.log(np.asarray(cfg.w_init, dtype=float))
    steps = np.sqrt(cfg.sigma2) * rng.standard_normal((T - 1, z0.size))
    z = np.vstack([z0, z0 + np.cumsum(steps, axis=0)])
    z -= z.max(axis=1, keepdims=True)
    w = np.exp(z)
    w /= w.sum(axis=1, keepdims=True)
    w[0] = cfg.w_init
    y = np.array([_mixture_draws(w[t], cfg.comp_means, cfg.comp_sds, 1, rng)[0] for t in range(T)])
    return y, w


def _sir_tau_leap(S, I, R, beta, gamma, weeks, dt, rng):
    N = S + I + R
    per_week = int(round(1.0 / dt))
    out = np.empty(weeks, dtype=np.int64)
    p_rec = -np.expm1(-gamma * dt)
    for week in range(weeks):
        for _ in range(per_week):
            if I == 0:
                break
            p_inf = -np.expm1(-beta * I / N * dt)
            new_inf = rng.binomial(S, p_inf)
            new_rec = rng.binomial(I, p_rec)
            S -= new_inf
            I += new_inf - new_rec
            R += new_rec
        out[week] = I
    return out


def _sir_gillespie(S, I, R, beta, gamma, weeks, rng):
    N = S + I + R
    out = np.empty(weeks, dtype=np.int64)
    t = 0.0
    week = 0
    while week < weeks:
        rate_inf = beta * S * I / N
        rate_rec = gamma * I
        total = rate_inf + rate_rec
        t_next = t + rng.exponential(1.0 / total) if total > 0 else np.inf
        while week < weeks and t_next >= week + 1:
            out[week] = I
            week += 1
        if week >= weeks:
            break
        t = t_next
        if rng.random() * total < rate_inf:
            S -= 1
            I += 1
        else:
            I -= 1
            R += 1
    return out


def gen_sir(cfg, rng=None):
    """Weekly infected counts from a stochastic SIR epidemic.

    Starts with ``initial_infected`` infectious and the rest susceptible;
    returns the infectious count at the end of each of ``cfg.weeks`` weeks.
    ``cfg.method`` picks tau-leaping (binomial event counts per ``dt``) or the
    exact Gillespie algorithm.
    """
    rng = check_random_state(rng)
    I = int(cfg.initial_infected)
    S = int(cfg.population) - I
    if cfg.method == "gillespie":
        return _sir_gillespie(S, I, 0, cfg.beta, cfg.gamma, int(cfg.weeks), rng)
    return _sir_tau_leap(S, I, 0, cfg.beta, cfg.gamma, int(cfg.weeks), cfg.dt, rng)
