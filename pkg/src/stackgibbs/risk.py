"""Empirical CRPS risk of a linear pool as a function of its weights.

Both risks reduce to ``lin @ w - 0.5 * w @ quad @ w`` once the per-time
expectation blocks are summed with their time weights, so each evaluation is
O(C^2) no matter how many observations were scored.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._validation import check_discount, check_random_state, check_simplex, discount_weights
from .distributions import ComponentForecast, Gaussian
from .scoring import cross_abs_matrix, normal_crps_terms, sample_crps_terms

DEFAULT_DISCOUNT = 0.98
DEFAULT_MC_SAMPLES = 10_000


@dataclass(frozen=True)
class ScorePanel:
    """Time-indexed CRPS expectation blocks for C components.

    Attributes
    ----------
    abs_to_obs : ndarray of shape (T, C)
    cross_abs : ndarray of shape (T, C, C)
    loglik : ndarray of shape (T, C) or None
        Component log predictive densities at the observations (for BMA).
    """

    abs_to_obs: np.ndarray
    cross_abs: np.ndarray
    loglik: np.ndarray = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.abs_to_obs, dtype=float))
        b = np.asarray(self.cross_abs, dtype=float)
        T, C = a.shape
        if b.shape == (C, C):
            b = np.broadcast_to(b, (T, C, C))
        if b.shape != (T, C, C):
            raise ValueError(f"cross_abs has shape {b.shape}, expected {(T, C, C)}")
        object.__setattr__(self, "abs_to_obs", a)
        object.__setattr__(self, "cross_abs", b)
        if self.loglik is not None:
            ll = np.atleast_2d(np.asarray(self.loglik, dtype=float))
            if ll.shape != (T, C):
                raise ValueError(f"loglik has shape {ll.shape}, expected {(T, C)}")
            object.__setattr__(self, "loglik", ll)

    @property
    def n_times(self):
        return self.abs_to_obs.shape[0]

    @property
    def n_components(self):
        return self.abs_to_obs.shape[1]

    def component_crps(self):
        """Per-time CRPS of each component alone, shape (T, C)."""
        return self.abs_to_obs - 0.5 * np.diagonal(self.cross_abs, axis1=1, axis2=2)

    def pool_crps(self, w):
        """Per-time CRPS of the pool with weights ``w``, shape (T,)."""
        w = np.asarray(w, dtype=float)
        return self.abs_to_obs @ w - 0.5 * np.einsum("c,tcd,d->t", w, self.cross_abs, w)

    def subset(self, idx):
        idx = np.asarray(idx)
        ll = None if self.loglik is None else self.loglik[idx]
        return ScorePanel(self.abs_to_obs[idx], self.cross_abs[idx], ll)

    @classmethod
    def stack(cls, rows, loglik=None):
        """Build a panel from a list of :class:`MixtureCrpsTerms`."""
        a = np.stack([r.abs_to_obs for r in rows])
        b = np.stack([r.cross_abs for r in rows])
        return cls(a, b, None if loglik is None else np.asarray(loglik, dtype=float))


def _is_component_list(x):
    return len(x) > 0 and all(isinstance(c, ComponentForecast) for c in x)


def build_score_panel(forecasts, y, backend="auto", n_mc=DEFAULT_MC_SAMPLES, rng=None,
                      pairing="permutation"):
    """Score components against observations.

    Parameters
    ----------
    forecasts : sequence
        Either one list of C components shared by every observation (i.i.d.
        setting) or T lists of C components, one per observation.
    y : array_like of shape (T,)
    backend : {"auto", "closed_form_normal_mixture", "monte_carlo"}
        ``"auto"`` picks the closed form when every component is Gaussian.
    n_mc : int
        Draws per non-empirical component for the Monte-Carlo backend;
        :class:`~stackgibbs.distributions.Empirical` components use their own
        samples.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a non-empty 1-d array")
    if _is_component_list(forecasts):
        per_time = None
        comps = list(forecasts)
    else:
        per_time = [list(f) for f in forecasts]
        if len(per_time) != y.size:
            raise ValueError(f"{len(per_time)} forecast sets for {y.size} observations")
        sizes = {len(f) for f in per_time}
        if len(sizes) != 1 or not all(_is_component_list(f) for f in per_time):
            raise ValueError("every time point needs the same number of ComponentForecast objects")
        comps = per_time[0]
    all_comps = comps if per_time is None else [c for f in per_time for c in f]
    if backend == "auto":
        gaussian = all(isinstance(c, Gaussian) for c in all_comps)
        backend = "closed_form_normal_mixture" if gaussian else "monte_carlo"
    if backend not in ("closed_form_normal_mixture", "monte_carlo"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "closed_form_normal_mixture" and not all(isinstance(c, Gaussian) for c in all_comps):
        raise ValueError("closed-form backend needs Gaussian components")
    rng = check_random_state(rng)

    def terms_for(components, obs, cross=None):
        if backend == "closed_form_normal_mixture":
            mus = [c.mu for c in components]
            sds = [c.sigma for c in components]
            return [normal_crps_terms(mus, sds, v) for v in obs]
        samples = [c.samples if hasattr(c, "samples") else c.sample(n_mc, rng) for c in components]
        if cross is None:
            cross = cross_abs_matrix(samples, rng, pairing)
        return [sample_crps_terms(samples, v, cross_abs=cross) for v in obs]

    if per_time is None:
        rows = terms_for(comps, y)
        loglik = np.array([[c.logpdf(v) for c in comps] for v in y])
    else:
        rows = [terms_for(f, [v])[0] for f, v in zip(per_time, y)]
        loglik = np.array([[c.logpdf(v) for c in f] for f, v in zip(per_time, y)])
    return ScorePanel.stack(rows, loglik)


@dataclass(frozen=True)
class RiskContext:
    """Everything the empirical risk needs.

    Attributes
    ----------
    mode : {"iid", "dynamic"}
    panel : ScorePanel
    discount : float
        Geometric discount in (0, 1]; only used in dynamic mode.
    observations : ndarray or None
        Kept for bookkeeping; the panel already encodes them.
    """

    mode: str
    panel: ScorePanel
    discount: float = DEFAULT_DISCOUNT
    observations: np.ndarray = None

    def __post_init__(self):
        if self.mode not in ("iid", "dynamic"):
            raise ValueError(f"mode must be 'iid' or 'dynamic', got {self.mode!r}")
        object.__setattr__(self, "discount", check_discount(self.discount))
        if self.panel.n_times < 1:
            raise ValueError("risk needs at least one scored observation")

    @classmethod
    def from_forecasts(cls, forecasts, y, mode=None, discount=DEFAULT_DISCOUNT, **panel_kw):
        """Build a context directly from components and observations.

        ``mode`` defaults to ``"iid"`` for a single shared component list and
        ``"dynamic"`` for per-time lists.
        """
        if mode is None:
            mode = "iid" if _is_component_list(forecasts) else "dynamic"
        panel = build_score_panel(forecasts, y, **panel_kw)
        return cls(mode, panel, discount, np.atleast_1d(np.asarray(y, dtype=float)))

    @property
    def n_obs(self):
        return self.panel.n_times

    @property
    def n_components(self):
        return self.panel.n_components

    @cached_property
    def time_weights(self):
        if self.mode == "iid":
            return np.ones(self.n_obs)
        return discount_weights(self.n_obs, self.discount)

    @cached_property
    def lin(self):
        return self.time_weights @ self.panel.abs_to_obs / self.n_obs

    @cached_property
    def quad(self):
        q = np.tensordot(self.time_weights, self.panel.cross_abs, axes=1) / self.n_obs
        return 0.5 * (q + q.T)

    def risk(self, w):
        """Risk at one weight vector (C,) or a batch (K, C)."""
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.n_components:
            raise ValueError(f"weights have {w.shape[-1]} entries, expected {self.n_components}")
        if w.ndim == 1:
            return float(w @ self.lin - 0.5 * w @ self.quad @ w)
        return w @ self.lin - 0.5 * np.einsum("kc,cd,kd->k", w, self.quad, w)

    def subset(self, idx):
        """Context restricted to the observations at ``idx`` (order kept)."""
        idx = np.sort(np.asarray(idx))
        obs = None if self.observations is None else self.observations[idx]
        return RiskContext(self.mode, self.panel.subset(idx), self.discount, obs)


def _risk(ctx, w, mode):
    if ctx.mode != mode:
        raise ValueError(f"context is in {ctx.mode!r} mode, expected {mode!r}")
    return ctx.risk(check_simplex(w, ctx.n_components))


def empirical_risk_iid(ctx, w):
    """Mean CRPS of the pool over i.i.d. observations."""
    return _risk(ctx, w, "iid")


def empirical_risk_dynamic(ctx, w):
    """Discounted CRPS risk ``(1/T) sum_t discount**(T-t) CRPS_t``."""
    return _risk(ctx, w, "dynamic")
