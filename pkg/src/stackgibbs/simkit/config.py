"""Configurations of the three simulation studies."""

from dataclasses import dataclass, fields, replace

import numpy as np


@dataclass(frozen=True)
class _StudyConfig:
    """Fields shared by every study: replicates, seed and method settings.

    ``eta`` is the SGP learning rate and ``avs_eta`` the AVS one. The sampler
    budget (``draws_per_chain``, ``burn_in``) is per fit; sequential studies
    refit at every time step.
    """

    def _check_common(self):
        if int(self.replicates) < 1:
            raise ValueError("replicates must be >= 1")
        if not self.eta > 0 or not self.avs_eta >= 0:
            raise ValueError("eta must be > 0 and avs_eta >= 0")
        if not 0 <= int(self.burn_in) < int(self.draws_per_chain):
            raise ValueError("need 0 <= burn_in < draws_per_chain")

    def replace(self, **changes):
        return replace(self, **changes)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def _check_mixture(comp_means, comp_sds, candidate_sd):
    if len(comp_means) != len(comp_sds):
        raise ValueError("comp_means and comp_sds differ in length")
    if np.any(np.asarray(comp_sds, dtype=float) <= 0) or not candidate_sd > 0:
        raise ValueError("all standard deviations must be > 0")


@dataclass(frozen=True)
class IidStudyConfig(_StudyConfig):
    """Fixed-weight two-component mixture data, six fixed Gaussian candidates."""

    nu: float = 0.65
    comp_means: tuple = (3.0, 6.5)
    comp_sds: tuple = (1.0, 1.0)
    candidate_means: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    candidate_sd: float = 1.0
    sample_sizes: tuple = (10, 20, 50, 100, 200)
    replicates: int = 50
    eval_draws: int = 1000
    seed: int = 0
    eta: float = 15.0
    avs_eta: float = 1.0
    draws_per_chain: int = 12_000
    burn_in: int = 2_000

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu!r}")
        _check_mixture(self.comp_means, self.comp_sds, self.candidate_sd)
        if len(self.comp_means) != 2:
            raise ValueError("the i.i.d. study uses a two-component mixture")
        if any(int(n) < 1 for n in self.sample_sizes) or int(self.eval_draws) < 1:
            raise ValueError("sample sizes and eval_draws must be >= 1")
        self._check_common()


@dataclass(frozen=True)
class DynamicStudyConfig(_StudyConfig):
    """Mixture weights following a softmax random walk; one observation per step."""

    T: int = 50
    sigma2: float = 0.01
    w_init: tuple = (0.65, 0.35)
    comp_means: tuple = (3.0, 6.5)
    comp_sds: tuple = (1.0, 1.0)
    candidate_means: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)
    candidate_sd: float = 1.0
    replicates: int = 50
    seed: int = 0
    eta: float = 15.0
    avs_eta: float = 1.0
    discount: float = 0.98
    draws_per_chain: int = 12_000
    burn_in: int = 2_000

    def __post_init__(self):
        if int(self.T) < 2:
            raise ValueError("T must be >= 2")
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be >= 0")
        w = np.asarray(self.w_init, dtype=float)
        if w.size != len(self.comp_means) or np.any(w <= 0) or abs(w.sum() - 1) > 1e-9:
            raise ValueError("w_init must be a strictly positive simplex point, one entry per component")
        _check_mixture(self.comp_means, self.comp_sds, self.candidate_sd)
        self._check_common()


@dataclass(frozen=True)
class SirStudyConfig(_StudyConfig):
    """Stochastic SIR epidemics forecast one week ahead by four components.

    Rates are per week. ``method`` selects tau-leaping (step ``dt`` weeks) or
    the exact Gillespie algorithm. Generators accept any nonnegative rates
    (e.g. ``beta = 0``); :func:`run_study` additionally requires
    ``0 < gamma < beta`` so that an epidemic can take off.
    """

    population: int = 10_000
    beta: float = 0.5
    gamma: float = 0.25
    initial_infected: int = 100
    weeks: int = 35
    fit_start_week: int = 5
    dt: float = 0.01
    method: str = "tau_leap"
    n_samples: int = 10_000
    replicates: int = 200
    seed: int = 0
    eta: float = 1.0
    avs_eta: float = 1.0
    discount: float = 0.98
    draws_per_chain: int = 12_000
    burn_in: int = 2_000

    def __post_init__(self):
        if int(self.population) < 1:
            raise ValueError("population must be >= 1")
        if not 0 <= int(self.initial_infected) <= int(self.population):
            raise ValueError("initial_infected must lie in [0, population]")
        if not (self.beta >= 0 and self.gamma >= 0):
            raise ValueError("rates must be nonnegative")
        if not 4 <= int(self.fit_start_week) < int(self.weeks):
            raise ValueError("need 4 <= fit_start_week < weeks")
        if not 0 < self.dt <= 0.01:
            raise ValueError("tau-leap step dt must lie in (0, 0.01] weeks")
        if self.method not in ("tau_leap", "gillespie"):
            raise ValueError(f"method must be 'tau_leap' or 'gillespie', got {self.method!r}")
        if int(self.n_samples) < 2:
            raise ValueError("n_samples must be >= 2")
        self._check_common()

    def check_epidemic(self):
        if not 0 < self.gamma < self.beta:
            raise ValueError(
                f"need 0 < gamma < beta for an epidemic, got beta={self.beta}, gamma={self.gamma}"
            )
