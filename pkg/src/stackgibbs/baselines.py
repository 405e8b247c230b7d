"""Competing weight rules: Bayesian model averaging, AVS and equal weights.

BMA and AVS both exponentiate a discounted sum over past observations::

    BMA:  w_c ∝ prior_c * exp(sum_t alpha**(T-t) * loglik[t, c])
    AVS:  w_c ∝ prior_c * exp(-eta * sum_t alpha**(T-t) * score[t, c])

Discounting log-likelihood contributions is the power-prior form of dynamic
BMA; with ``alpha = 1`` it is ordinary BMA. Both are computed in log space.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_discount, check_positive, check_simplex, discount_weights, normalize_log_weights

LOGLIK_FLOOR = -745.0


@dataclass(frozen=True)
class ModelEvidencePanel:
    """Per-time, per-component evidence for BMA and AVS.

    Attributes
    ----------
    loglik : ndarray of shape (T, C)
        Log predictive densities; ``-inf`` is floored at -745.
    score : ndarray of shape (T, C)
        Per-component CRPS values.
    prior : ndarray of shape (C,), optional
        Prior model probabilities; uniform when omitted.
    discount : float
        Geometric discount in (0, 1].
    """

    loglik: np.ndarray
    score: np.ndarray
    prior: np.ndarray = None
    discount: float = 1.0

    def __post_init__(self):
        ll = np.atleast_2d(np.asarray(self.loglik, dtype=float))
        sc = np.atleast_2d(np.asarray(self.score, dtype=float))
        if ll.shape != sc.shape:
            raise ValueError(f"loglik {ll.shape} and score {sc.shape} differ in shape")
        if np.any(np.isnan(ll)) or np.any(ll == np.inf):
            raise ValueError("loglik entries must be finite or -inf")
        if not np.all(np.isfinite(sc)):
            raise ValueError("score entries must be finite")
        object.__setattr__(self, "_degenerate", bool(ll.size) and bool(np.all(ll == -np.inf)))
        C = ll.shape[1]
        prior = np.full(C, 1.0 / C) if self.prior is None else check_simplex(self.prior, C, "prior")
        object.__setattr__(self, "loglik", np.maximum(ll, LOGLIK_FLOOR))
        object.__setattr__(self, "score", sc)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "discount", check_discount(self.discount))

    @classmethod
    def from_score_panel(cls, panel, prior=None, discount=1.0):
        """Evidence panel from a :class:`~stackgibbs.risk.ScorePanel` with log-likelihoods."""
        if panel.loglik is None:
            raise ValueError("score panel carries no log-likelihoods")
        return cls(panel.loglik, panel.component_crps(), prior, discount)

    @property
    def n_times(self):
        return self.loglik.shape[0]

    @property
    def n_components(self):
        return self.loglik.shape[1]

    def _discounted_sum(self, x):
        return discount_weights(self.n_times, self.discount) @ x


def _prior_log(prior):
    with np.errstate(divide="ignore"):
        return np.log(prior)


def bma_weights(panel):
    """Posterior model probabilities with discounted log-likelihoods."""
    if panel._degenerate:
        raise ValueError("every log-likelihood is -inf; no component has support at the data")
    if panel.n_times == 0:
        return panel.prior.copy()
    return normalize_log_weights(_prior_log(panel.prior) + panel._discounted_sum(panel.loglik))


def avs_weights(panel, eta=1.0):
    """Exponentiated discounted cumulative CRPS, ``w_c ∝ prior_c exp(-eta S_c)``."""
    eta = check_positive(eta, "eta", allow_zero=True)
    if panel.n_times == 0 or eta == 0.0:
        return panel.prior.copy()
    return normalize_log_weights(_prior_log(panel.prior) - eta * panel._discounted_sum(panel.score))


def eqw_weights(n_components):
    """Equal weights ``1 / C``."""
    C = int(n_components)
    if C < 1:
        raise ValueError(f"need at least one component, got {n_components!r}")
    return np.full(C, 1.0 / C)
