"""Compiled single-chain HMC kernel for the stacked Gibbs posterior.

All randomness is drawn by the caller from a numpy Generator and passed in,
so results depend only on the chain's seed, not on the compiler.
"""

import math

import numba as nb
import numpy as np

# dual averaging constants
DA_GAMMA = 0.05
DA_T0 = 10.0
DA_KAPPA = 0.75


@nb.njit(cache=True)
def logdens_grad(z, lin, quad, alpha, alpha_sum, scale_n, w, qw, gz):
    """Log density in log-ratio coordinates; fills ``gz`` with its gradient."""
    d = z.size
    C = d + 1
    m = 0.0
    for j in range(d):
        if z[j] > m:
            m = z[j]
    total = math.exp(-m)
    for j in range(d):
        w[j] = math.exp(z[j] - m)
        total += w[j]
    w[d] = math.exp(-m)
    log_total = math.log(total) + m
    prior = alpha[d] * (-log_total)
    for j in range(d):
        prior += alpha[j] * (z[j] - log_total)
    for c in range(C):
        w[c] /= total
    risk = 0.0
    for c in range(C):
        s = 0.0
        for e in range(C):
            s += quad[c, e] * w[e]
        qw[c] = s
        risk += w[c] * (lin[c] - 0.5 * s)
    gw = 0.0
    for c in range(C):
        gw += scale_n * (qw[c] - lin[c]) * w[c]
    for j in range(d):
        gz[j] = w[j] * (scale_n * (qw[j] - lin[j]) - gw - alpha_sum) + alpha[j]
    return prior - scale_n * risk


@nb.njit(cache=True)
def _cholesky(a, out):
    """Lower Cholesky factor of ``a`` into ``out``; False if not positive definite."""
    n = a.shape[0]
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= out[i, k] * out[j, k]
            if i == j:
                if not s > 0.0:
                    return False
                out[i, i] = math.sqrt(s)
            else:
                out[i, j] = s / out[j, j]
        for j in range(i + 1, n):
            out[i, j] = 0.0
    return True


@nb.njit(cache=True)
def _refit_metric(seg, L):
    """Replace ``L`` by the Cholesky factor of the covariance of ``seg``."""
    n, d = seg.shape
    if n < 2:
        return
    mean = np.zeros(d)
    for i in range(n):
        for a in range(d):
            mean[a] += seg[i, a]
    mean /= n
    cov = np.zeros((d, d))
    for i in range(n):
        for a in range(d):
            da = seg[i, a] - mean[a]
            for b in range(a + 1):
                cov[a, b] += da * (seg[i, b] - mean[b])
    trace = 0.0
    for a in range(d):
        for b in range(a + 1):
            cov[a, b] /= n - 1
            cov[b, a] = cov[a, b]
        trace += cov[a, a]
    jitter = 1e-8 * max(trace / d, 1e-12)
    for a in range(d):
        cov[a, a] += jitter
    cand = np.zeros((d, d))
    if _cholesky(cov, cand):
        L[:, :] = cand


@nb.njit(cache=True)
def hmc_chain(z0, chol0, eps0, xi, jitter, logu, lin, quad, alpha, scale_n,
              burn_in, win_start, win_end, target_accept, t_int, max_leap, out):
    """Run one chain; post burn-in states go to ``out`` (shape (n - burn_in, d)).

    Returns the summed acceptance probability after burn-in, the final state,
    the final metric factor and the final step size.
    """
    n_iter, d = xi.shape
    C = d + 1
    alpha_sum = alpha.sum()
    z = z0.copy()
    L = chol0.copy()
    w = np.empty(C)
    qw = np.empty(C)
    grad = np.empty(d)
    gq = np.empty(d)
    zq = np.empty(d)
    v = np.empty(d)
    lp = logdens_grad(z, lin, quad, alpha, alpha_sum, scale_n, w, qw, grad)
    eps = eps0
    mu = math.log(10.0 * eps)
    log_eps_bar = math.log(eps)
    h_bar = 0.0
    n_da = 0
    history = np.empty((max(burn_in, 1), d))
    next_win = 0
    accept_sum = 0.0
    for it in range(n_iter):
        n_leap = int(math.ceil(jitter[it] * t_int / eps))
        n_leap = min(max(n_leap, 1), max_leap)
        for a in range(d):
            s = 0.0
            for b in range(a, d):
                s += L[b, a] * grad[b]
            v[a] = xi[it, a] + 0.5 * eps * s
            zq[a] = z[a]
        lpq = lp
        for step in range(n_leap):
            for a in range(d):
                s = 0.0
                for b in range(a + 1):
                    s += L[a, b] * v[b]
                zq[a] += eps * s
            lpq = logdens_grad(zq, lin, quad, alpha, alpha_sum, scale_n, w, qw, gq)
            h = eps if step < n_leap - 1 else 0.5 * eps
            for a in range(d):
                s = 0.0
                for b in range(a, d):
                    s += L[b, a] * gq[b]
                v[a] += h * s
        kin = 0.0
        for a in range(d):
            kin += v[a] * v[a] - xi[it, a] * xi[it, a]
        log_ratio = lpq - lp - 0.5 * kin
        if not math.isfinite(log_ratio):
            log_ratio = -np.inf
        if logu[it] < log_ratio:
            for a in range(d):
                z[a] = zq[a]
                grad[a] = gq[a]
            lp = lpq
        prob = math.exp(min(log_ratio, 0.0)) if log_ratio > -np.inf else 0.0
        if it < burn_in:
            n_da += 1
            frac = 1.0 / (n_da + DA_T0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - prob)
            log_eps = mu - math.sqrt(n_da) / DA_GAMMA * h_bar
            weight = n_da ** (-DA_KAPPA)
            log_eps_bar = weight * log_eps + (1.0 - weight) * log_eps_bar
            eps = math.exp(log_eps)
            for a in range(d):
                history[it, a] = z[a]
            if next_win < win_end.size and it + 1 == win_end[next_win]:
                lo = (win_start[next_win] + it + 1) // 2
                _refit_metric(history[lo:it + 1], L)
                mu = math.log(10.0 * eps)
                log_eps_bar = math.log(eps)
                h_bar = 0.0
                n_da = 0
                next_win += 1
            if it == burn_in - 1:
                eps = math.exp(log_eps_bar)
        else:
            for a in range(d):
                out[it - burn_in, a] = z[a]
            accept_sum += prob
    return accept_sum, z, L, eps
