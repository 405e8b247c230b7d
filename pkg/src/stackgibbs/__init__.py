"""Linear-pool forecast ensembles with weights from a stacked Gibbs posterior.

The posterior over pool weights is ``Dirichlet prior x exp(-eta * n * risk)``
where the risk is the (optionally discounted) empirical CRPS of the pool.
Baselines (BMA, AVS, equal weights), proper scoring rules, PIT calibration
metrics, simulation studies and a forecast-hub pipeline are included.
"""

__version__ = "0.1.0"

from .baselines import ModelEvidencePanel, avs_weights, bma_weights, eqw_weights
from .calibration import pit, pit_histogram, uwd1
from .distributions import (
    ComponentForecast, Empirical, Gaussian, LinearPool, PiecewiseCDF, eval_cdf, pool_cdf,
    quantiles_to_piecewise_cdf, sample,
)
from .estimators import (
    COMBINERS, AdaptiveVariableSelection, BayesianModelAveraging, EqualWeights, StackedGibbsPosterior,
)
from .risk import RiskContext, ScorePanel, build_score_panel, empirical_risk_dynamic, empirical_risk_iid
from .sampler import (
    AUDIT_CONFIG, Diagnostics, GibbsConfig, PosteriorDraws, SamplerState, cross_validate_eta, diagnostics,
    ess, log_gibbs_density, posterior_mean_weights, rhat, risk_minimizer_oracle, sample_posterior, tune_eta,
)
from .scoring import (
    MixtureCrpsTerms, QuantileForecast, crps_mixture_mc, crps_normal, crps_normal_mixture, crps_numeric,
    interval_score, log_score, sample_crps_terms, weighted_interval_score,
)

__all__ = [
    "AUDIT_CONFIG", "COMBINERS", "AdaptiveVariableSelection", "BayesianModelAveraging", "ComponentForecast",
    "Diagnostics", "Empirical", "EqualWeights", "Gaussian", "GibbsConfig", "LinearPool", "MixtureCrpsTerms",
    "ModelEvidencePanel", "PiecewiseCDF", "PosteriorDraws", "QuantileForecast", "RiskContext",
    "SamplerState", "ScorePanel", "StackedGibbsPosterior", "avs_weights", "bma_weights",
    "build_score_panel", "cross_validate_eta", "crps_mixture_mc", "crps_normal", "crps_normal_mixture",
    "crps_numeric", "diagnostics", "empirical_risk_dynamic", "empirical_risk_iid", "eqw_weights", "ess",
    "eval_cdf", "interval_score", "log_gibbs_density", "log_score", "pit", "pit_histogram", "pool_cdf",
    "posterior_mean_weights", "quantiles_to_piecewise_cdf", "rhat", "risk_minimizer_oracle", "sample",
    "sample_crps_terms", "sample_posterior", "tune_eta", "uwd1", "weighted_interval_score",
]
