"""Estimator-style wrappers around the weight rules.

Every combiner follows the scikit-learn protocol: hyperparameters are set in
``__init__`` and exposed through ``get_params``/``set_params``; ``fit`` learns
``weights_`` from component forecasts and observations; ``predict`` returns
the fitted linear pool; ``score`` is the negative mean CRPS (higher is
better).

``X`` is either one list of C component forecasts shared by every
observation (i.i.d. data) or a list of T such lists, one per observation.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import ModelEvidencePanel, avs_weights, bma_weights, eqw_weights
from .distributions import LinearPool
from .risk import DEFAULT_DISCOUNT, DEFAULT_MC_SAMPLES, RiskContext, _is_component_list, build_score_panel
from .sampler import GibbsConfig, posterior_mean_weights, sample_posterior


class BaseCombiner(BaseEstimator):
    """Shared fit/predict/score plumbing; subclasses implement ``_weights``."""

    def _context(self, X, y):
        return RiskContext.from_forecasts(
            X, y,
            mode=getattr(self, "mode", None),
            discount=getattr(self, "discount", DEFAULT_DISCOUNT),
            backend=getattr(self, "backend", "auto"),
            n_mc=getattr(self, "n_mc", DEFAULT_MC_SAMPLES),
            rng=getattr(self, "seed", 0),
        )

    def fit(self, X, y):
        """Learn weights from component forecasts ``X`` and observations ``y``."""
        return self.fit_context(self._context(X, y))

    def fit_context(self, ctx):
        """Learn weights from a prebuilt :class:`~stackgibbs.risk.RiskContext`."""
        self.weights_ = np.asarray(self._weights(ctx), dtype=float)
        self.n_components_ = ctx.n_components
        self.n_obs_ = ctx.n_obs
        return self

    def _weights(self, ctx):
        raise NotImplementedError

    def predict(self, X):
        """Pool the components of ``X`` with the fitted weights.

        Returns one :class:`LinearPool` for a component list, or a list of
        pools for per-time component lists.
        """
        check_is_fitted(self, "weights_")
        if _is_component_list(X):
            return self._pool(X)
        return [self._pool(f) for f in X]

    def _pool(self, comps):
        if len(comps) != self.n_components_:
            raise ValueError(f"got {len(comps)} components, fitted on {self.n_components_}")
        return LinearPool(tuple(comps), self.weights_)

    def score(self, X, y):
        """Negative mean CRPS of the fitted pool on ``(X, y)``."""
        check_is_fitted(self, "weights_")
        panel = build_score_panel(
            X, y,
            backend=getattr(self, "backend", "auto"),
            n_mc=getattr(self, "n_mc", DEFAULT_MC_SAMPLES),
            rng=getattr(self, "seed", 0),
        )
        return -float(panel.pool_crps(self.weights_).mean())


class StackedGibbsPosterior(BaseCombiner):
    """Posterior-mean weights under the stacked Gibbs posterior.

    Parameters
    ----------
    eta : float
        Learning rate.
    dirichlet_alpha : float or sequence, optional
        Dirichlet prior parameter (scalar is broadcast); defaults to ones.
    mode : {"iid", "dynamic"}, optional
        Risk type; inferred from the layout of ``X`` when omitted.
    discount : float
        Geometric discount for the dynamic risk.
    chains, draws_per_chain, burn_in, seed, sampler
        Sampler settings, see :class:`~stackgibbs.sampler.GibbsConfig`.
    warm_start : bool
        Start a refit from where the previous fit's chains stopped, reusing
        the adapted metric and step size.
    backend : str
        CRPS backend for building the risk from forecasts.
    n_mc : int
        Monte-Carlo draws per component when scoring non-empirical forecasts.

    Attributes
    ----------
    weights_ : ndarray of shape (C,)
    posterior_ : PosteriorDraws
    """

    def __init__(self, eta=1.0, dirichlet_alpha=None, mode=None, discount=DEFAULT_DISCOUNT,
                 chains=1, draws_per_chain=60_000, burn_in=10_000, seed=0, sampler="hmc",
                 warm_start=False, backend="auto", n_mc=DEFAULT_MC_SAMPLES):
        self.eta = eta
        self.dirichlet_alpha = dirichlet_alpha
        self.mode = mode
        self.discount = discount
        self.chains = chains
        self.draws_per_chain = draws_per_chain
        self.burn_in = burn_in
        self.seed = seed
        self.sampler = sampler
        self.warm_start = warm_start
        self.backend = backend
        self.n_mc = n_mc

    @property
    def config(self):
        return GibbsConfig(
            eta=self.eta, dirichlet_alpha=self.dirichlet_alpha, chains=self.chains,
            draws_per_chain=self.draws_per_chain, burn_in=self.burn_in, seed=self.seed,
            sampler=self.sampler,
        )

    def _weights(self, ctx):
        start = None
        previous = getattr(self, "posterior_", None)
        if self.warm_start and previous is not None and previous.final_state is not None:
            if previous.final_state.z.shape == (self.chains, ctx.n_components - 1):
                start = previous.final_state
        self.posterior_ = sample_posterior(ctx, self.config, warm_start=start)
        return posterior_mean_weights(self.posterior_)


class AdaptiveVariableSelection(BaseCombiner):
    """Weights ``∝ prior * exp(-eta * discounted cumulative CRPS)``."""

    def __init__(self, eta=1.0, prior=None, mode=None, discount=DEFAULT_DISCOUNT,
                 backend="auto", n_mc=DEFAULT_MC_SAMPLES, seed=0):
        self.eta = eta
        self.prior = prior
        self.mode = mode
        self.discount = discount
        self.backend = backend
        self.n_mc = n_mc
        self.seed = seed

    def _weights(self, ctx):
        return avs_weights(_evidence(ctx, self.prior), self.eta)


class BayesianModelAveraging(BaseCombiner):
    """Posterior model probabilities from (discounted) log predictive densities."""

    def __init__(self, prior=None, mode=None, discount=DEFAULT_DISCOUNT,
                 backend="auto", n_mc=DEFAULT_MC_SAMPLES, seed=0):
        self.prior = prior
        self.mode = mode
        self.discount = discount
        self.backend = backend
        self.n_mc = n_mc
        self.seed = seed

    def _weights(self, ctx):
        return bma_weights(_evidence(ctx, self.prior))


class EqualWeights(BaseCombiner):
    """The ``1 / C`` pool."""

    def _weights(self, ctx):
        return eqw_weights(ctx.n_components)


def _evidence(ctx, prior):
    discount = ctx.discount if ctx.mode == "dynamic" else 1.0
    return ModelEvidencePanel.from_score_panel(ctx.panel, prior, discount)


COMBINERS = {
    "sgp": StackedGibbsPosterior,
    "avs": AdaptiveVariableSelection,
    "bma": BayesianModelAveraging,
    "eqw": EqualWeights,
}
