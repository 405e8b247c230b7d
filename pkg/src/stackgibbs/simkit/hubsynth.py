"""Synthetic forecast-hub archives with a known set of skilled teams.

Each location's weekly counts follow a Poisson-noised epidemic wave. A team
forecasts next week's count as a normal distribution on the ``log(1 + count)``
scale and submits its quantiles. Skilled teams are centred close to the truth
with a matching spread; the others carry a persistent bias and a poorly
matched spread, so they score worse in almost every week.
"""

import datetime as dt
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ..hub import FLUSIGHT_PROBS, HubRecord, TruthRecord


@dataclass(frozen=True)
class SyntheticHubConfig:
    """Shape and skill structure of a synthetic archive."""

    n_teams: int = 10
    n_good: int = 3
    n_locations: int = 3
    weeks: int = 20
    start: str = "2023-10-14"
    peak: float = 800.0
    good_error_sd: float = 0.1
    good_sd: float = 0.15
    bad_bias: tuple = (0.5, 1.2)
    bad_error_sd: float = 0.3
    bad_sd: tuple = (0.05, 0.8)
    seed: int = 0

    def __post_init__(self):
        if not 1 <= int(self.n_good) <= int(self.n_teams):
            raise ValueError("need 1 <= n_good <= n_teams")
        if int(self.n_locations) < 1 or int(self.weeks) < 2:
            raise ValueError("need at least one location and two weeks")
        if not (self.peak > 0 and self.good_sd > 0 and min(self.bad_sd) > 0):
            raise ValueError("peak and spreads must be > 0")


def team_names(cfg):
    """Team identifiers; the first ``cfg.n_good`` are the skilled teams."""
    return [f"team{j:02d}" for j in range(int(cfg.n_teams))]


def location_names(cfg):
    return [f"loc{j:02d}" for j in range(int(cfg.n_locations))]


def _wave(weeks, peak, rng):
    t = np.arange(weeks + 1)
    centre = rng.uniform(0.4, 0.7) * weeks
    width = rng.uniform(0.15, 0.25) * weeks
    return peak * rng.uniform(0.5, 1.5) * np.exp(-0.5 * ((t - centre) / width) ** 2) + 5.0


def synthetic_hub_archive(cfg=None):
    """Generate hub records and truth.

    Returns
    -------
    records : list of HubRecord
        Horizon-1 quantile forecasts with the configured 23 probabilities for
        every team, location and reference week.
    truth : list of TruthRecord
        Counts for every target week (reference week + 1).
    """
    cfg = SyntheticHubConfig() if cfg is None else cfg
    probs = np.asarray(FLUSIGHT_PROBS)
    z = norm.ppf(probs)
    start = dt.date.fromisoformat(cfg.start)
    teams = team_names(cfg)
    records, truth = [], []
    for li, loc in enumerate(location_names(cfg)):
        rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), li]))
        counts = rng.poisson(_wave(int(cfg.weeks), cfg.peak, rng))
        truth += [TruthRecord(loc, start + dt.timedelta(weeks=k), int(c)) for k, c in enumerate(counts)]
        bias = rng.uniform(*cfg.bad_bias, size=len(teams)) * rng.choice([-1.0, 1.0], size=len(teams))
        spread = np.exp(rng.uniform(*np.log(cfg.bad_sd), size=len(teams)))
        for k in range(int(cfg.weeks)):
            ref = start + dt.timedelta(weeks=k)
            target = np.log1p(counts[k + 1])
            for j, team in enumerate(teams):
                if j < cfg.n_good:
                    centre, sd = target + cfg.good_error_sd * rng.standard_normal(), cfg.good_sd
                else:
                    centre, sd = target + bias[j] + cfg.bad_error_sd * rng.standard_normal(), spread[j]
                values = np.maximum(np.expm1(centre + sd * z), 0.0)
                records += [HubRecord(team, loc, ref, 1, float(p), float(v)) for p, v in zip(probs, values)]
    return records, truth
