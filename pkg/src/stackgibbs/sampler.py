"""Stacked Gibbs posterior over linear-pool weights.

The target density on the simplex is::

    pi(w) ∝ exp(-eta * n * risk(w)) * Dirichlet(w | alpha)

Chains run in additive log-ratio coordinates ``z_c = log(w_c / w_C)``
(c < C), where the Jacobian of the inverse map is ``prod_c w_c``. Every
emitted draw is ``softmax([z, 0])`` and so lies on the simplex by
construction.

The default kernel is Hamiltonian Monte Carlo with the analytic gradient, a
dense metric estimated over expanding burn-in windows, dual-averaging step
size adaptation and a jittered trajectory length. Adaptive random-walk
Metropolis is kept as ``sampler="rwm"``; it is cheaper per iteration but mixes
poorly once the posterior concentrates near a face of the simplex. Nothing
adapts after burn-in.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from . import _kernels
from ._validation import check_random_state, check_simplex, renormalize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GibbsConfig:
    """Learning rate, prior and sampler settings.

    ``draws_per_chain`` counts every iteration of a chain, burn-in included,
    so each chain keeps ``draws_per_chain - burn_in`` draws.
    """

    eta: float = 1.0
    dirichlet_alpha: object = None
    chains: int = 1
    draws_per_chain: int = 60_000
    burn_in: int = 10_000
    seed: int = 0
    step_scale: float = 0.5
    target_accept: float = None
    sampler: str = "hmc"

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"eta must be >= 0, got {self.eta!r}")
        if int(self.chains) < 1:
            raise ValueError("chains must be >= 1")
        if not 0 <= int(self.burn_in) < int(self.draws_per_chain):
            raise ValueError("need 0 <= burn_in < draws_per_chain")
        if not self.step_scale > 0:
            raise ValueError("step_scale must be > 0")
        if self.sampler not in ("hmc", "rwm"):
            raise ValueError(f"sampler must be 'hmc' or 'rwm', got {self.sampler!r}")
        if self.target_accept is None:
            default = 0.8 if self.sampler == "hmc" else 0.234
            object.__setattr__(self, "target_accept", default)
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.dirichlet_alpha is not None:
            a = np.atleast_1d(np.asarray(self.dirichlet_alpha, dtype=float))
            if np.any(~(a > 0)):
                raise ValueError("dirichlet_alpha entries must be > 0")
            object.__setattr__(self, "dirichlet_alpha", tuple(a.tolist()))

    def prior(self, n_components):
        """Dirichlet parameter vector of length ``n_components``."""
        if self.dirichlet_alpha is None:
            return np.ones(n_components)
        a = np.asarray(self.dirichlet_alpha, dtype=float)
        if a.size == 1:
            return np.full(n_components, a[0])
        if a.size != n_components:
            raise ValueError(f"dirichlet_alpha has {a.size} entries, expected {n_components}")
        return a

    @property
    def kept_per_chain(self):
        return self.draws_per_chain - self.burn_in

    def replace(self, **changes):
        return replace(self, **changes)


AUDIT_CONFIG = GibbsConfig(chains=4, draws_per_chain=60_000, burn_in=10_000)


@dataclass(frozen=True)
class SamplerState:
    """Terminal chain positions plus adapted metric and step size.

    Attributes
    ----------
    z : ndarray of shape (chains, C - 1)
        Log-ratio coordinates (last component is the reference).
    chol : ndarray of shape (chains, C - 1, C - 1)
        Cholesky factor of the adapted covariance.
    step : ndarray of shape (chains,)
        Leapfrog step size (HMC) or proposal multiplier (RWM).
    """

    z: np.ndarray
    chol: np.ndarray
    step: np.ndarray


@dataclass(frozen=True)
class PosteriorDraws:
    """Post burn-in draws of all chains.

    Attributes
    ----------
    draws : ndarray of shape (M, C)
        All chains concatenated.
    per_chain : ndarray of shape (chains, M // chains, C)
    config_used : GibbsConfig
    accept_rate : ndarray of shape (chains,)
    final_state : SamplerState or None
        Where each chain stopped, with its adapted metric; pass it as
        ``warm_start`` to resume on a closely related target.
    """

    per_chain: np.ndarray
    config_used: GibbsConfig
    accept_rate: np.ndarray = field(default_factory=lambda: np.array([np.nan]))
    final_state: "SamplerState" = None

    @property
    def draws(self):
        k, n, c = self.per_chain.shape
        return self.per_chain.reshape(k * n, c)

    def __len__(self):
        return self.per_chain.shape[0] * self.per_chain.shape[1]


@dataclass(frozen=True)
class Diagnostics:
    rhat: np.ndarray
    ess: np.ndarray
    accept_rate: float

    @property
    def max_rhat(self):
        return float(np.nanmax(self.rhat))

    @property
    def min_ess(self):
        return float(np.nanmin(self.ess))


def log_gibbs_density(w, ctx, cfg):
    """Unnormalized log Gibbs posterior density at a simplex point.

    Returns ``-eta * n * risk(w) + sum_c (alpha_c - 1) log w_c``.
    """
    w = check_simplex(w, ctx.n_components)
    alpha = cfg.prior(ctx.n_components)
    if np.any((w == 0) & (alpha < 1)):
        raise ValueError("density undefined on the boundary when a prior parameter is < 1")
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    prior = np.sum(np.where(alpha == 1.0, 0.0, (alpha - 1.0) * logw))
    return -cfg.eta * ctx.n_obs * ctx.risk(w) + prior


def _softmax_ref(z):
    """Map (K, C-1) log-ratios to (log w, w) with the last coordinate as reference."""
    full = np.zeros(z.shape[:-1] + (z.shape[-1] + 1,))
    full[..., :-1] = z
    full -= full.max(axis=-1, keepdims=True)
    e = np.exp(full)
    total = e.sum(axis=-1, keepdims=True)
    return full - np.log(total), e / total


def _adaptation_windows(burn_in):
    """Covariance-update iterations inside burn-in (slow windows)."""
    if burn_in < 150:
        return []
    end = burn_in - max(50, burn_in // 5)
    ends, size, pos = [], 25, 75
    while pos + size < end:
        nxt = pos + size
        if nxt + 2 * size >= end:
            nxt = end
        ends.append((pos, nxt))
        pos = nxt
        size *= 2
    if not ends or ends[-1][1] < end:
        ends.append((pos, end))
    return [(a, b) for a, b in ends if b > a]


class _LogRatioTarget:
    """Gibbs posterior density and gradient in log-ratio coordinates.

    With ``w = softmax(z, 0)`` the Jacobian ``prod_c w_c`` turns the
    Dirichlet term into ``sum_c alpha_c log w_c``.
    """

    def __init__(self, ctx, cfg):
        self.alpha = cfg.prior(ctx.n_components)
        self.alpha_sum = self.alpha.sum()
        self.scale_n = cfg.eta * ctx.n_obs
        self.lin = ctx.lin
        self.quad = ctx.quad
        self.dim = ctx.n_components - 1

    def logdens(self, z):
        logw, w = _softmax_ref(z)
        risk = w @ self.lin - 0.5 * ((w @ self.quad) * w).sum(axis=-1)
        return logw @ self.alpha - self.scale_n * risk

    def logdens_grad(self, z):
        logw, w = _softmax_ref(z)
        qw = w @ self.quad
        risk = w @ self.lin - 0.5 * (qw * w).sum(axis=-1)
        g = self.scale_n * (qw - self.lin)
        gz = w * (g - (g * w).sum(axis=-1, keepdims=True) - self.alpha_sum) + self.alpha
        return logw @ self.alpha - self.scale_n * risk, gz[..., :-1]


class _MetricAdapter:
    """Collects burn-in states and refits a per-chain dense covariance at window ends."""

    def __init__(self, burn_in, chol):
        self.window_end = {b: a for a, b in _adaptation_windows(burn_in)}
        K, d, _ = chol.shape
        self.history = np.empty((burn_in, K, d))
        self.chol = chol.copy()
        self.dim = d

    def record(self, it, z):
        """Store the state; return True when the metric was just refit."""
        self.history[it] = z
        if it + 1 not in self.window_end:
            return False
        start = self.window_end[it + 1]
        seg = self.history[(start + it + 1) // 2: it + 1]
        for k in range(seg.shape[1]):
            cov = np.cov(seg[:, k, :], rowvar=False).reshape(self.dim, self.dim)
            jitter = 1e-8 * max(np.trace(cov) / self.dim, 1e-12)
            try:
                self.chol[k] = np.linalg.cholesky(cov + jitter * np.eye(self.dim))
            except np.linalg.LinAlgError:
                continue
        return True


def _noise_blocks(rngs, n, shapes, block=4096):
    """Yield per-iteration noise, drawn per chain in blocks for speed."""
    for start in range(0, n, block):
        m = min(block, n - start)
        drawn = [
            np.stack([draw(r, m) for r in rngs], axis=1) for draw in shapes
        ]
        for i in range(m):
            yield [x[i] for x in drawn]


def _rwm_chains(target, z, cfg, rngs, chol, step):
    K, d = z.shape
    lp = target.logdens(z)
    metric = _MetricAdapter(cfg.burn_in, chol)
    base = 1.0 if step is None else 2.38 / np.sqrt(d)
    log_scale = np.full(K, np.log(cfg.step_scale)) if step is None else np.log(step / base)
    out = np.empty((K, cfg.kept_per_chain, d))
    n_acc = np.zeros(K)
    since_reset = 0
    noise = _noise_blocks(rngs, cfg.draws_per_chain, [
        lambda r, m: r.standard_normal((m, d)),
        lambda r, m: np.log(r.random(m)),
    ])
    for it, (eps, logu) in enumerate(noise):
        scale = base * np.exp(log_scale)
        zp = z + scale[:, None] * (metric.chol @ eps[:, :, None])[:, :, 0]
        lpp = target.logdens(zp)
        accept = logu < lpp - lp
        z = np.where(accept[:, None], zp, z)
        lp = np.where(accept, lpp, lp)
        if it < cfg.burn_in:
            since_reset += 1
            gain = min(1.0, 10.0 / (since_reset + 10.0) ** 0.6)
            log_scale = log_scale + gain * (accept - cfg.target_accept)
            if metric.record(it, z):
                base = 2.38 / np.sqrt(d)
                log_scale = np.zeros(K)
                since_reset = 0
        else:
            out[:, it - cfg.burn_in] = z
            n_acc += accept
    state = SamplerState(z, metric.chol, base * np.exp(log_scale))
    return out, n_acc / cfg.kept_per_chain, state


HMC_INTEGRATION_TIME = 1.5
HMC_MAX_LEAPFROG = 64


def _hmc_chains(target, z, cfg, rngs, chol, step):
    K, d = z.shape
    windows = _adaptation_windows(cfg.burn_in)
    win_start = np.array([a for a, _ in windows], dtype=np.int64)
    win_end = np.array([b for _, b in windows], dtype=np.int64)
    n = cfg.draws_per_chain
    out = np.empty((K, cfg.kept_per_chain, d))
    accept = np.empty(K)
    z_end, chol_end, step_end = np.empty_like(z), np.empty((K, d, d)), np.empty(K)
    for k, r in enumerate(rngs):
        xi = r.standard_normal((n, d))
        jitter = r.uniform(0.5, 1.5, n)
        logu = np.log(r.random(n))
        eps0 = float(cfg.step_scale) if step is None else float(step[k])
        acc, z_end[k], chol_end[k], step_end[k] = _kernels.hmc_chain(
            np.ascontiguousarray(z[k]), np.ascontiguousarray(chol[k]), eps0, xi, jitter, logu,
            target.lin, target.quad, target.alpha, float(target.scale_n), int(cfg.burn_in),
            win_start, win_end, float(cfg.target_accept), HMC_INTEGRATION_TIME,
            HMC_MAX_LEAPFROG, out[k],
        )
        accept[k] = acc / cfg.kept_per_chain
    return out, accept, SamplerState(z_end, chol_end, step_end)


def sample_posterior(ctx, cfg, warm_start=None):
    """Draw from the stacked Gibbs posterior.

    Parameters
    ----------
    ctx : RiskContext
    cfg : GibbsConfig
    warm_start : SamplerState, optional
        Start every chain where a previous fit stopped and reuse its metric
        and step size (for sequential refits as data arrive). Burn-in still
        applies; windows shorter than 150 iterations only tune the step size.

    Returns
    -------
    PosteriorDraws
        Draws after burn-in; deterministic given ``cfg.seed`` (and
        ``warm_start``).
    """
    C = ctx.n_components
    K = int(cfg.chains)
    if C == 1:
        return PosteriorDraws(np.ones((K, cfg.kept_per_chain, 1)), cfg, np.ones(K))
    target = _LogRatioTarget(ctx, cfg)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(K)]
    if warm_start is None:
        w0 = np.stack([r.dirichlet(target.alpha) for r in rngs])
        w0 = np.clip(w0, 1e-12, None)
        z = np.log(w0[:, :-1]) - np.log(w0[:, -1:])
        chol = np.tile(np.eye(C - 1), (K, 1, 1))
        step = None
    else:
        z = np.asarray(warm_start.z, dtype=float)
        if z.shape != (K, C - 1):
            raise ValueError(f"warm start has shape {z.shape}, expected {(K, C - 1)}")
        chol, step = np.asarray(warm_start.chol, dtype=float), warm_start.step
    lp = target.logdens(z)
    if not np.all(np.isfinite(lp)):
        raise FloatingPointError(
            f"non-finite log density at initialization (values {lp}); "
            "check the risk panel for NaN/inf entries"
        )
    run = {"hmc": _hmc_chains, "rwm": _rwm_chains}[cfg.sampler]
    out, accept_rate, state = run(target, z, cfg, rngs, chol, step)
    _, w = _softmax_ref(out)
    logger.debug("sampled %d chains x %d draws, acceptance %s", K, cfg.kept_per_chain, accept_rate)
    return PosteriorDraws(w, cfg, accept_rate, state)


def posterior_mean_weights(draws):
    """Coordinate-wise posterior mean, renormalized to sum to one."""
    d = draws.draws if isinstance(draws, PosteriorDraws) else np.asarray(draws, dtype=float)
    if d.ndim != 2 or d.shape[0] == 0:
        raise ValueError("no draws to average")
    m = d.mean(axis=0)
    return m / m.sum()


# -- convergence diagnostics ---------------------------------------------------


def _split_chains(x):
    """(chains, n) -> (2 * chains, n // 2), dropping a middle draw when n is odd."""
    n = x.shape[1]
    half = n // 2
    return np.concatenate([x[:, :half], x[:, n - half:]], axis=0)


def _rank_normalize(x):
    r = rankdata(x, method="average").reshape(x.shape)
    return ndtri((r - 0.375) / (x.size + 0.25))


def _rhat_basic(x):
    m, n = x.shape
    w = x.var(axis=1, ddof=1).mean()
    b = n * x.mean(axis=1).var(ddof=1)
    if w <= 0:
        return np.nan
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x):
    n = x.shape[-1]
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, size, axis=-1)
    acov = np.fft.irfft(f * np.conj(f), size, axis=-1)[..., :n]
    return acov / n


def _ess_basic(x):
    m, n = x.shape
    acov = _autocov(x)
    chain_mean = x.mean(axis=1)
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += chain_mean.var(ddof=1)
    if var_plus <= 0:
        return np.nan
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer initial positive, monotone sequence on paired autocorrelations
    tau = -1.0
    prev = np.inf
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    tau = max(tau, 1.0 / np.log10(m * n))
    return m * n / tau


def rhat(chains):
    """Rank-normalized split R-hat for draws shaped (chains, n).

    Reported as ``max(bulk, folded)`` and floored at 1.0, since values
    below one only reflect sampling noise in the variance ratio.
    """
    x = np.asarray(chains, dtype=float)
    if np.ptp(x) == 0:
        return 1.0
    s = _split_chains(x)
    bulk = _rhat_basic(_rank_normalize(s))
    folded = np.abs(s - np.median(s))
    tail = _rhat_basic(_rank_normalize(folded)) if np.ptp(folded) > 0 else bulk
    return max(1.0, np.nanmax([bulk, tail]))


def ess(chains):
    """Bulk effective sample size (rank-normalized, split chains), capped at the draw count."""
    x = np.asarray(chains, dtype=float)
    total = x.size
    if np.ptp(x) == 0:
        return float(total)
    val = _ess_basic(_rank_normalize(_split_chains(x)))
    return float(min(val, total))


def diagnostics(draws):
    """Per-coordinate R-hat and ESS plus the mean acceptance rate."""
    pc = draws.per_chain
    if pc.shape[1] < 4:
        raise ValueError("need at least 4 post burn-in draws per chain")
    C = pc.shape[2]
    r = np.array([rhat(pc[:, :, c]) for c in range(C)])
    e = np.array([ess(pc[:, :, c]) for c in range(C)])
    return Diagnostics(r, e, float(np.mean(draws.accept_rate)))


# -- learning-rate tuning and the risk-minimizer oracle -------------------------


def _folds(n, folds, rng):
    if folds < 2 or folds > n:
        raise ValueError(f"folds must lie in [2, n={n}], got {folds}")
    perm = rng.permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate_eta(ctx, grid, folds, cfg):
    """Held-out mean CRPS of posterior-mean weights for each eta in ``grid``."""
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("eta grid is empty")
    n = ctx.n_obs
    parts = _folds(n, int(folds), np.random.default_rng(cfg.seed))
    scores = []
    for eta in grid:
        held = np.empty(n)
        for test in parts:
            train = np.setdiff1d(np.arange(n), test)
            if train.size == 0:
                raise ValueError("a fold left the training split empty")
            post = sample_posterior(ctx.subset(train), cfg.replace(eta=eta))
            w = posterior_mean_weights(post)
            held[test] = ctx.panel.subset(test).pool_crps(w)
        scores.append(float(held.mean()))
    return np.array(scores)


def tune_eta(ctx, grid, folds, cfg):
    """Grid value of eta with the lowest cross-validated CRPS; ties go to the smaller eta."""
    grid = np.asarray([float(g) for g in grid])
    if grid.size == 1:
        return float(grid[0])
    scores = cross_validate_eta(ctx, grid, folds, cfg)
    best = scores.min()
    tied = grid[np.isclose(scores, best, rtol=1e-12, atol=0.0)]
    return float(tied.min())


def project_to_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _fd_grad(f, w, h=1e-6):
    g = np.empty_like(w)
    for c in range(w.size):
        e = np.zeros_like(w)
        e[c] = h
        g[c] = (f(w + e) - f(w - e)) / (2.0 * h)
    return g


def _projected_gradient(f, w, max_iter=2000, tol=1e-13):
    fw = f(w)
    step = 1.0
    for _ in range(max_iter):
        g = _fd_grad(f, w)
        while True:
            cand = project_to_simplex(w - step * g)
            diff = cand - w
            fc = f(cand)
            if fc <= fw + g @ diff + diff @ diff / (2.0 * step) + 1e-15:
                break
            step *= 0.5
            if step < 1e-14:
                return w, fw
        moved = np.linalg.norm(diff)
        gain = fw - fc
        w, fw = cand, fc
        step *= 1.5
        if moved < 1e-12 or 0 <= gain < tol:
            break
    return w, fw


def _simplex_grid(C, spacing):
    m = int(round(1.0 / spacing))
    if C == 2:
        a = np.arange(m + 1) / m
        return np.column_stack([a, 1.0 - a])
    pts = [(i, j, m - i - j) for i in range(m + 1) for j in range(m + 1 - i)]
    return np.asarray(pts, dtype=float) / m


def risk_minimizer_oracle(ctx, restarts=10, seed=0):
    """Best simplex point found by projected gradient descent from several starts.

    Gradients are central finite differences of the risk. Starts are the
    equal-weight point plus ``restarts - 1`` uniform Dirichlet draws. For
    C <= 3 a 0.01-spaced simplex grid is also searched and its best point
    polished.
    """
    C = ctx.n_components
    if C == 1:
        return np.ones(1)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = check_random_state(seed)
    f = ctx.risk
    starts = [np.full(C, 1.0 / C)] + [rng.dirichlet(np.ones(C)) for _ in range(restarts - 1)]
    best_w, best_f = None, np.inf
    for w0 in starts:
        w, fw = _projected_gradient(f, w0)
        if fw < best_f:
            best_w, best_f = w, fw
    if C <= 3:
        grid = _simplex_grid(C, 0.01)
        vals = f(grid)
        g = grid[np.argmin(vals)]
        if vals.min() < best_f:
            w, fw = _projected_gradient(f, g)
            best_w, best_f = (w, fw) if fw < vals.min() else (g, vals.min())
    return renormalize(best_w)
