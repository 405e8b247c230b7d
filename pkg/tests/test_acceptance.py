"""Exit criteria, each run at its stated scale and tolerance.

Every test records a one-line outcome through the ``criterion`` fixture; the
lines are printed in the terminal summary under "acceptance criteria".
"""

import datetime as dt
import time

import numpy as np
import pytest
from scipy.stats import beta as beta_dist
from scipy.stats import kstest

from stackgibbs.distributions import Gaussian, LinearPool
from stackgibbs.hub import FLUSIGHT_PROBS, run_hub_pipeline
from stackgibbs.risk import RiskContext
from stackgibbs.sampler import (
    GibbsConfig, diagnostics, posterior_mean_weights, risk_minimizer_oracle, sample_posterior,
)
from stackgibbs.scoring import QuantileForecast, crps_mixture_mc, crps_normal, crps_normal_mixture, crps_numeric, weighted_interval_score
from stackgibbs.simkit import IidStudyConfig, SyntheticHubConfig, gen_iid_mixture, run_study, synthetic_hub_archive
from stackgibbs.simkit.hubsynth import team_names

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def test_criterion_1_mixture_crps_identity(criterion):
    start = time.perf_counter()
    r = np.random.default_rng(2024)
    mc_ok, worst_numeric = 0, 0.0
    for case in range(100):
        C = int(r.integers(1, 7))
        mus, sigmas = r.normal(0, 3, C), r.uniform(0.3, 3.0, C)
        w = r.dirichlet(np.ones(C))
        y = float(r.normal(0, 4))
        exact = float(crps_normal_mixture(mus, sigmas, w, y))
        samples = [r.normal(m, s, 100_000) for m, s in zip(mus, sigmas)]
        mc = crps_mixture_mc(samples, w, y, rng=r)
        mc_ok += abs(mc - exact) / exact < 0.01
        pool = LinearPool(tuple(Gaussian(m, s) for m, s in zip(mus, sigmas)), w)
        lo = min(float((mus - 12 * sigmas).min()), y - 1.0)
        hi = max(float((mus + 12 * sigmas).max()), y + 1.0)
        numeric = crps_numeric(pool.cdf, y, lo, hi, n_grid=400_000)
        worst_numeric = max(worst_numeric, abs(numeric - exact))
    elapsed = time.perf_counter() - start
    passed = mc_ok >= 95 and worst_numeric < 1e-6 and elapsed < 120
    criterion(1, passed, f"MC within 1% on {mc_ok}/100; max |closed - numeric| = {worst_numeric:.2e}; {elapsed:.0f}s")
    assert passed


def test_criterion_2_prior_recovery(criterion):
    start = time.perf_counter()
    ctx = RiskContext.from_forecasts([Gaussian(0, 1)] * 3, np.zeros(5), mode="iid")
    cfg = GibbsConfig(eta=0.0, chains=4, draws_per_chain=22_500, burn_in=10_000, seed=11)
    draws = sample_posterior(ctx, cfg)
    ks = max(kstest(draws.draws[:, c], beta_dist(1, 2).cdf).statistic for c in range(3))
    max_rhat = diagnostics(draws).max_rhat
    elapsed = time.perf_counter() - start
    passed = len(draws) == 50_000 and ks < 0.02 and max_rhat < 1.01 and elapsed < 60
    criterion(2, passed, f"{len(draws)} draws; max marginal KS = {ks:.4f}; max R-hat = {max_rhat:.4f}; {elapsed:.0f}s")
    assert passed


def test_criterion_3_empirical_consistency(criterion):
    start = time.perf_counter()
    cands = [Gaussian(m, 1.0) for m in IidStudyConfig().candidate_means]
    sizes = (10, 50, 200)
    dist = {n: [] for n in sizes}
    sd = {n: [] for n in sizes}
    for rep in range(20):
        y = gen_iid_mixture(IidStudyConfig(), 200, np.random.default_rng([7, rep]))
        for n in sizes:
            ctx = RiskContext.from_forecasts(cands, y[:n], mode="iid")
            draws = sample_posterior(ctx, GibbsConfig(eta=15.0, seed=1000 * rep + n))
            dist[n].append(np.linalg.norm(posterior_mean_weights(draws) - risk_minimizer_oracle(ctx)))
            sd[n].append(draws.draws.std(axis=0))
    med = [float(np.median(dist[n])) for n in sizes]
    sd10, sd200 = np.mean(sd[10], axis=0), np.mean(sd[200], axis=0)
    elapsed = time.perf_counter() - start
    passed = med[0] > med[1] > med[2] and bool(np.all(sd200 < sd10)) and elapsed < 600
    criterion(3, passed, "median |mean - oracle| at n=10,50,200: "
              + ", ".join(f"{m:.4f}" for m in med)
              + f"; mean posterior sd {sd10.mean():.4f} -> {sd200.mean():.4f}; {elapsed:.0f}s")
    assert passed


def test_criterion_4_iid_method_ordering(criterion):
    start = time.perf_counter()
    rep = run_study("iid", ["SGP", "BMA", "EQW"], replicates=50, sample_sizes=(200,))
    sgp, bma, eqw = (rep.summary(m, "crps", 200) for m in ("SGP", "BMA", "EQW"))
    bma_max = rep.values("BMA", "max_weight", 200)
    elapsed = time.perf_counter() - start
    passed = sgp < bma and sgp < eqw and bma_max.mean() > 0.99 and elapsed < 900
    criterion(4, passed, f"mean CRPS at n=200: SGP {sgp:.4f}, BMA {bma:.4f}, EQW {eqw:.4f}; "
              f"BMA max weight mean {bma_max.mean():.4f} (min {bma_max.min():.4f}); {elapsed:.0f}s")
    assert passed


def test_criterion_5_dynamic_calibration(criterion):
    start = time.perf_counter()
    rep = run_study("dynamic", ["SGP", "BMA", "EQW"], replicates=50, T=50)
    uwd_sgp = float(np.median(rep.values("SGP", "uwd1")))
    uwd_bma = float(np.median(rep.values("BMA", "uwd1")))
    late = range(25, 50)
    logs_sgp = float(np.mean(np.concatenate([rep.values("SGP", "logs", t) for t in late])))
    logs_eqw = float(np.mean(np.concatenate([rep.values("EQW", "logs", t) for t in late])))
    elapsed = time.perf_counter() - start
    passed = uwd_sgp < uwd_bma and logs_sgp < logs_eqw and elapsed < 1200
    criterion(5, passed, f"median UWD1 SGP {uwd_sgp:.4f} vs BMA {uwd_bma:.4f}; "
              f"mean LogS t=25..49 SGP {logs_sgp:.4f} vs EQW {logs_eqw:.4f}; {elapsed:.0f}s")
    assert passed


def test_criterion_6_strong_prior_regularization(criterion):
    start = time.perf_counter()
    rep = run_study("sir", ["SGP", "SGP50"], replicates=200)
    emitted = {(row[1], row[3]) for row in rep.summary_rows() if row[2] == "all"}
    both = {("SGP", "crps"), ("SGP50", "crps")} <= emitted
    mean_sgp, mean_50 = rep.summary("SGP", "crps"), rep.summary("SGP50", "crps")
    med_sgp, med_50 = rep.summary("SGP", "crps", stat="median"), rep.summary("SGP50", "crps", stat="median")
    mean_ok = mean_50 <= mean_sgp
    median_ok = med_sgp <= med_50 or abs(med_sgp - med_50) <= 0.05 * med_50
    elapsed = time.perf_counter() - start
    passed = both and mean_ok and median_ok and elapsed < 1800
    criterion(6, passed, f"mean CRPS SGP50 {mean_50:.3f} vs SGP {mean_sgp:.3f} ({'ok' if mean_ok else 'reversed'}); "
              f"median SGP {med_sgp:.3f} vs SGP50 {med_50:.3f} ({'ok' if median_ok else 'reversed'}); {elapsed:.0f}s")
    assert passed


def test_criterion_7_wis_close_to_crps(criterion):
    probs = np.asarray(FLUSIGHT_PROBS)
    qf = QuantileForecast(probs, Gaussian(0.0, 1.0).ppf(probs))
    rel = []
    for y in (-2.0, -1.0, 0.0, 1.0, 2.0):
        exact = float(crps_normal(0.0, 1.0, y))
        rel.append(abs(weighted_interval_score(qf, y) - exact) / exact)
    avg = float(np.mean(rel))
    passed = avg < 0.05
    criterion(7, passed, f"mean |WIS - CRPS| / CRPS = {avg:.4f} (per y: {', '.join(f'{v:.3f}' for v in rel)})")
    assert passed


def test_criterion_8_synthetic_hub(criterion):
    start = time.perf_counter()
    scfg = SyntheticHubConfig()
    records, truth = synthetic_hub_archive(scfg)
    report = run_hub_pipeline(records, truth, GibbsConfig(eta=1.0), methods=["SGP", "AVS", "BMA", "EQW"])
    week10 = dt.date.fromisoformat(scfg.start) + dt.timedelta(weeks=9)
    top = set(team_names(scfg)[: scfg.n_good])
    share = {
        (method, loc): sum(w for team, w in report.weights_at(loc, week10, method).items() if team in top)
        for method in ("SGP", "AVS", "BMA") for loc in report.teams
    }
    weights_ok = all(v > 0.5 for v in share.values())
    loc_sums = report.rank_counts("location").sum(axis=0)
    week_sums = report.rank_counts("week").sum(axis=0)
    scored_weeks = scfg.weeks - 1
    sums_ok = bool(np.all(loc_sums == scfg.n_locations) and np.all(week_sums == scored_weeks))
    elapsed = time.perf_counter() - start
    passed = weights_ok and sums_ok and elapsed < 600
    detail = "; ".join(
        f"{m} top-3 weight " + "/".join(f"{share[(m, loc)]:.2f}" for loc in sorted(report.teams))
        for m in ("SGP", "AVS", "BMA")
    )
    criterion(8, passed, f"{detail}; rank columns sum to {sorted({int(v) for v in loc_sums})} locations and "
              f"{sorted({int(v) for v in week_sums})} scored weeks; {elapsed:.0f}s")
    assert passed


def test_criterion_9_league_table_out_of_scope(criterion):
    criterion(9, None, "league-table replication needs the real submission archive; covered by criteria 7 and 8")
    pytest.skip("out of scope: requires the real submission archive")
