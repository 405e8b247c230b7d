"""Forecast-hub quantile submissions: parsing, weekly ensembling and scoring.

Each team's quantile set is turned into a piecewise-linear CDF on the
``log(1 + count)`` scale. For every location the pipeline walks forward in
reference weeks: weights for week ``k`` are fitted on the weeks whose targets
were already observed, the pooled forecast is scored with CRPS on the log
scale, and WIS is computed on the raw count scale from weighted-average
quantiles. The first week of a location has no scored history, so every
method uses equal weights there.
"""

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .baselines import ModelEvidencePanel, avs_weights, bma_weights, eqw_weights
from .distributions import quantiles_to_piecewise_cdf
from .risk import DEFAULT_DISCOUNT, DEFAULT_MC_SAMPLES, RiskContext, ScorePanel
from .sampler import GibbsConfig, posterior_mean_weights, sample_posterior
from .scoring import QuantileForecast, sample_crps_terms, weighted_interval_score

logger = logging.getLogger(__name__)

FLUSIGHT_PROBS = (0.01, 0.025) + tuple(round(0.05 * k, 2) for k in range(1, 20)) + (0.975, 0.99)
HUB_COLUMNS = ("team", "location", "reference_date", "horizon", "output_type_id", "value")
TRUTH_COLUMNS = ("location", "date", "value")
HUB_METHODS = ("SGP", "SGP50", "AVS", "BMA", "EQW", "QAVG")
DEFAULT_HUB_METHODS = ("SGP", "AVS", "BMA", "EQW")
STRONG_PRIOR = 50.0
PROB_TOL = 1e-9

SCORE_HEADER = ("location", "reference_date", "target_date", "method", "crps_log", "wis")
WEIGHT_HEADER = ("location", "reference_date", "method", "team", "weight")
LOCATION_MEAN_HEADER = ("location", "method", "n_weeks", "mean_crps_log", "mean_wis")
WEEK_MEAN_HEADER = ("reference_date", "method", "n_locations", "mean_crps_log", "mean_wis")


class HubFormatError(ValueError):
    """Malformed hub or truth file; the message names the offending rows."""


@dataclass(frozen=True, order=True)
class HubRecord:
    """One quantile of one team's forecast."""

    team: str
    location: str
    reference_date: dt.date
    horizon: int
    prob: float
    value: float

    @property
    def target_date(self):
        return self.reference_date + dt.timedelta(weeks=self.horizon)


@dataclass(frozen=True, order=True)
class TruthRecord:
    """Observed count for one location and week."""

    location: str
    date: dt.date
    value: int


# -- parsing -------------------------------------------------------------------


def _reader(path, required):
    fh = open(path, newline="")
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        fh.close()
        raise HubFormatError(f"{path}: missing columns {', '.join(missing)}")
    return fh, reader


def _number(text, col, line):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise HubFormatError(f"row {line}: non-numeric {col} {text!r}") from None
    if not math.isfinite(v):
        raise HubFormatError(f"row {line}: non-finite {col} {text!r}")
    return v


def _date(text, col, line):
    try:
        return dt.date.fromisoformat(str(text).strip())
    except ValueError:
        raise HubFormatError(f"row {line}: bad {col} {text!r} (want YYYY-MM-DD)") from None


def parse_hub_csv(path, probs=FLUSIGHT_PROBS):
    """Read and validate a hub quantile file.

    Parameters
    ----------
    path : str or Path
        CSV with columns ``team, location, reference_date, horizon,
        output_type_id, value``; ``output_type_id`` holds the probability. An
        optional ``output_type`` column restricts the file to ``quantile`` rows.
    probs : sequence of float
        Probability set every forecast must carry exactly.

    Returns
    -------
    list of HubRecord
        Sorted, so downstream results do not depend on row order.

    Raises
    ------
    HubFormatError
        Missing columns, non-numeric values, probabilities outside (0, 1),
        a forecast whose probability set differs from ``probs``, or quantile
        values that decrease in probability. Row numbers are file lines.
    """
    want = np.sort(np.asarray(probs, dtype=float))
    fh, reader = _reader(path, HUB_COLUMNS)
    groups = {}
    with fh:
        filter_type = "output_type" in reader.fieldnames
        for row in reader:
            line = reader.line_num
            if filter_type and row["output_type"].strip() != "quantile":
                continue
            p = _number(row["output_type_id"], "output_type_id", line)
            if not 0.0 < p < 1.0:
                raise HubFormatError(f"row {line}: probability {p} outside (0, 1)")
            v = _number(row["value"], "value", line)
            if v < 0:
                raise HubFormatError(f"row {line}: negative value {v}")
            h = _number(row["horizon"], "horizon", line)
            if h != int(h) or h < 1:
                raise HubFormatError(f"row {line}: horizon must be a positive integer, got {row['horizon']!r}")
            key = (row["team"].strip(), row["location"].strip(),
                   _date(row["reference_date"], "reference_date", line), int(h))
            groups.setdefault(key, []).append((p, v, line))
    out = []
    for key in sorted(groups):
        rows = sorted(groups[key])
        got = np.array([r[0] for r in rows])
        lines = [r[2] for r in rows]
        label = "team {} location {} week {} horizon {}".format(key[0], key[1], key[2], key[3])
        if got.size != want.size or np.any(np.abs(got - want) > PROB_TOL):
            raise HubFormatError(
                f"{label}: expected the {want.size} configured probabilities, got {got.size} "
                f"(rows {_span(lines)})"
            )
        vals = np.array([r[1] for r in rows])
        bad = np.flatnonzero(np.diff(vals) < 0)
        if bad.size:
            pairs = ", ".join(f"{lines[i]}->{lines[i + 1]}" for i in bad)
            raise HubFormatError(f"{label}: quantiles decrease in probability at rows {pairs}")
        out += [HubRecord(*key, float(p), float(v)) for p, v, _ in rows]
    return out


def _span(lines):
    lines = sorted(lines)
    return ", ".join(map(str, lines)) if len(lines) <= 6 else f"{lines[0]}..{lines[-1]}"


def parse_truth_csv(path):
    """Read observed counts (columns ``location, date, value``).

    Raises
    ------
    HubFormatError
        Missing columns, bad dates, negative or non-integer counts, or a
        duplicated (location, date).
    """
    fh, reader = _reader(path, TRUTH_COLUMNS)
    seen = {}
    with fh:
        for row in reader:
            line = reader.line_num
            v = _number(row["value"], "value", line)
            if v < 0 or v != int(v):
                raise HubFormatError(f"row {line}: count must be a nonnegative integer, got {row['value']!r}")
            key = (row["location"].strip(), _date(row["date"], "date", line))
            if key in seen:
                raise HubFormatError(f"row {line}: duplicate truth for {key[0]} {key[1]} (first at row {seen[key][1]})")
            seen[key] = (int(v), line)
    return [TruthRecord(loc, d, v) for (loc, d), (v, _) in sorted(seen.items())]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row])


def write_hub_csv(path, records):
    """Write records in the format :func:`parse_hub_csv` reads."""
    _write_rows(path, HUB_COLUMNS, [
        (r.team, r.location, r.reference_date.isoformat(), r.horizon, r.prob, r.value) for r in records
    ])


def write_truth_csv(path, truth):
    _write_rows(path, TRUTH_COLUMNS, [(t.location, t.date.isoformat(), t.value) for t in truth])


# -- forecast groups -----------------------------------------------------------


def _group(records, horizon):
    """{location: {week: {team: (probs, values)}}} for one horizon."""
    tmp = {}
    for r in records:
        if r.horizon == horizon:
            tmp.setdefault((r.location, r.reference_date, r.team), []).append((r.prob, r.value))
    out = {}
    for (loc, week, team), pv in tmp.items():
        pv.sort()
        out.setdefault(loc, {}).setdefault(week, {})[team] = (
            np.array([p for p, _ in pv]), np.array([v for _, v in pv]),
        )
    return out


def filter_complete_teams(records, weeks, location, horizon=1, n_probs=len(FLUSIGHT_PROBS)):
    """Teams with a full quantile set for every listed week at ``location``.

    Returns
    -------
    list of str
        Sorted team identifiers; empty when no team is complete.
    """
    weeks = list(weeks)
    if not weeks:
        raise ValueError("weeks must be nonempty")
    counts = {}
    for r in records:
        if r.location == location and r.horizon == horizon:
            counts.setdefault(r.team, {}).setdefault(r.reference_date, set()).add(r.prob)
    return sorted(
        team for team, by_week in counts.items()
        if all(len(by_week.get(w, ())) == n_probs for w in weeks)
    )


# -- pipeline ------------------------------------------------------------------


def check_hub_methods(methods):
    out = []
    for m in methods:
        name = str(m).strip().upper()
        if name not in HUB_METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(HUB_METHODS)}")
        if name not in out:
            out.append(name)
    if not out:
        raise ValueError("no methods given")
    return tuple(out)


def _seed(seed, location, *extra):
    ss = np.random.SeedSequence([int(seed), *location.encode("utf-8"), *map(int, extra)])
    return int(ss.generate_state(1)[0])


def _fit_weights(method, ctx, cfg, avs_eta, seed, warm):
    """Weights of ``method`` on ``ctx``; returns (weights, sampler state)."""
    C = ctx.n_components
    if method in ("EQW", "QAVG"):
        return eqw_weights(C), None
    if method in ("SGP", "SGP50"):
        gcfg = cfg.replace(seed=seed, dirichlet_alpha=STRONG_PRIOR if method == "SGP50" else cfg.dirichlet_alpha)
        draws = sample_posterior(ctx, gcfg, warm_start=warm)
        return posterior_mean_weights(draws), draws.final_state
    panel = ModelEvidencePanel.from_score_panel(ctx.panel, None, ctx.discount)
    if method == "AVS":
        return avs_weights(panel, avs_eta), None
    return bma_weights(panel), None


def _run_location(location, by_week, teams, truth, methods, cfg, avs_eta, discount, horizon, n_mc, probs):
    """Sequential weekly ensembling for one location."""
    weeks = sorted(by_week)
    notices, scores, weights = [], [], []
    # midpoint quantile grid: the CRPS below is that of an n_mc-point
    # discretization, computed exactly over all sample pairs
    u = (np.arange(n_mc) + 0.5) / n_mc
    terms, loglik, observed = [], [], []
    warm = {}
    for k, week in enumerate(weeks):
        target = week + dt.timedelta(weeks=horizon)
        raw_q = np.stack([by_week[week][t][1] for t in teams])
        comps = [quantiles_to_piecewise_cdf(probs, np.log1p(q)) for q in raw_q]
        # weeks whose target was already observed at this reference date
        known = [i for i, (w, ok) in enumerate(zip(weeks[:k], observed)) if ok and w + dt.timedelta(weeks=horizon) <= week]
        ctx = None
        if known:
            rows = [terms[i] for i in known]
            ctx = RiskContext("dynamic", ScorePanel.stack(rows, np.array([loglik[i] for i in known])), discount)
        fitted = {}
        for method in methods:
            if ctx is None:
                w = eqw_weights(len(teams))
            else:
                w, state = _fit_weights(method, ctx, cfg, avs_eta, _seed(cfg.seed, location, horizon, k, HUB_METHODS.index(method)), warm.get(method))
                if state is not None:
                    warm[method] = state
            fitted[method] = w
            weights += [(location, week.isoformat(), method, team, float(wc)) for team, wc in zip(teams, w)]
        y = truth.get((location, target))
        if y is None:
            observed.append(False)
            terms.append(None)
            loglik.append(None)
            notices.append(f"{location}: no truth for target {target.isoformat()} (reference week {week.isoformat()}); week skipped")
            logger.warning(notices[-1])
            continue
        ylog = math.log1p(y)
        samples = [c.ppf(u) for c in comps]
        term = sample_crps_terms(samples, ylog, pairing="all")
        observed.append(True)
        terms.append(term)
        loglik.append(np.array([float(c.logpdf(ylog)) for c in comps]))
        if k == 0:
            continue
        for method in methods:
            w = fitted[method]
            if method == "QAVG":
                qf = quantiles_to_piecewise_cdf(probs, np.log1p(w @ raw_q))
                crps = float(sample_crps_terms([qf.ppf(u)], ylog, pairing="all").crps(np.ones(1)))
            else:
                crps = float(term.crps(w))
            wis = weighted_interval_score(QuantileForecast(probs, w @ raw_q), float(y))
            scores.append((location, week.isoformat(), target.isoformat(), method, max(crps, 0.0), wis))
    return scores, weights, notices


@dataclass
class HubReport:
    """Scores, weights, means and rank counts of a hub pipeline run.

    ``scores`` rows follow ``SCORE_HEADER`` and ``weights`` rows
    ``WEIGHT_HEADER``. Locations without a complete team are listed in
    ``notices`` and take no part in the means or rankings.
    """

    methods: tuple
    scores: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    notices: list = field(default_factory=list)
    teams: dict = field(default_factory=dict)

    def _means(self, key_index):
        groups = {}
        for row in self.scores:
            groups.setdefault((row[key_index], row[3]), []).append(row[4:])
        out = []
        for key in sorted({k for k, _ in groups}):
            for method in self.methods:
                vals = np.array(groups.get((key, method), []), dtype=float)
                if vals.size:
                    out.append((key, method, vals.shape[0], float(vals[:, 0].mean()), float(vals[:, 1].mean())))
        return out

    def location_means(self):
        """Per location: mean log-scale CRPS and mean WIS over scored weeks."""
        return self._means(0)

    def week_means(self):
        """Per reference week: means over the locations scored that week."""
        return self._means(1)

    def mean_crps(self, by="location"):
        """``{key: {method: mean CRPS}}`` by location or by reference week."""
        rows = self.location_means() if by == "location" else self.week_means()
        out = {}
        for key, method, _, crps, _ in rows:
            out.setdefault(key, {})[method] = crps
        return out

    def rank_counts(self, by="location"):
        """How often each method ranked 1st..Mth by mean CRPS.

        Returns
        -------
        ndarray of shape (M, M)
            Row ``r`` counts rank ``r + 1``, columns follow ``methods``. Ties
            go to the method listed first. Each column sums to the number of
            ranked locations (or weeks).
        """
        M = len(self.methods)
        counts = np.zeros((M, M), dtype=int)
        for by_method in self.mean_crps(by).values():
            if len(by_method) != M:
                continue
            vals = np.array([by_method[m] for m in self.methods])
            for rank, j in enumerate(np.argsort(vals, kind="stable")):
                counts[rank, j] += 1
        return counts

    def rank_rows(self):
        """Table rows: rank, counts by location per method, counts by week per method."""
        loc, week = self.rank_counts("location"), self.rank_counts("week")
        return [(r + 1, *loc[r], *week[r]) for r in range(len(self.methods))]

    def rank_header(self):
        return ("rank", *(f"location_{m}" for m in self.methods), *(f"week_{m}" for m in self.methods))

    def weights_at(self, location, week, method):
        """``{team: weight}`` used for ``week`` (a date or ISO string)."""
        week = week.isoformat() if isinstance(week, dt.date) else str(week)
        return {t: w for loc, wk, m, t, w in self.weights if loc == location and wk == week and m == method}

    def write(self, outdir, prefix="hub"):
        """Write the five report CSVs; returns ``{name: path}``."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {name: outdir / f"{prefix}_{name}.csv" for name in
                 ("scores", "weights", "location_means", "week_means", "ranks")}
        _write_rows(paths["scores"], SCORE_HEADER, self.scores)
        _write_rows(paths["weights"], WEIGHT_HEADER, self.weights)
        _write_rows(paths["location_means"], LOCATION_MEAN_HEADER, self.location_means())
        _write_rows(paths["week_means"], WEEK_MEAN_HEADER, self.week_means())
        _write_rows(paths["ranks"], self.rank_header(), self.rank_rows())
        return paths


def run_hub_pipeline(records, truth, cfg=None, methods=DEFAULT_HUB_METHODS, avs_eta=1.0,
                     discount=DEFAULT_DISCOUNT, horizon=1, n_mc=DEFAULT_MC_SAMPLES,
                     probs=FLUSIGHT_PROBS, locations=None, n_jobs=1):
    """Weekly dynamic ensembles for every location of a hub archive.

    Parameters
    ----------
    records : list of HubRecord
    truth : list of TruthRecord
    cfg : GibbsConfig, optional
        Sampler settings for SGP. Defaults to ``GibbsConfig(eta=1)``.
    methods : sequence of str
        Subset of SGP, SGP50, AVS, BMA, EQW, QAVG.
    avs_eta : float
        AVS learning rate.
    discount : float
        Geometric discount of older weeks in every fitted rule.
    horizon : int
        Forecast horizon in weeks; training for week ``k`` only uses weeks
        whose target date is not after ``k``.
    n_mc : int
        Inverse-CDF draws per team and week for the CRPS terms, taken at the
        midpoints of ``n_mc`` equal probability bins.
    probs : sequence of float
        Probability levels of the submissions.
    locations : sequence of str, optional
        Restrict to these locations.
    n_jobs : int
        Locations processed in parallel.

    Returns
    -------
    HubReport
    """
    cfg = GibbsConfig(eta=1.0) if cfg is None else cfg
    methods = check_hub_methods(methods)
    probs = np.sort(np.asarray(probs, dtype=float))
    grouped = _group(records, int(horizon))
    obs = {(t.location, t.date): t.value for t in truth}
    wanted = sorted(grouped) if locations is None else [str(x) for x in locations]
    report = HubReport(methods)
    jobs = []
    for loc in wanted:
        by_week = grouped.get(loc, {})
        if not by_week:
            report.notices.append(f"{loc}: no forecasts at horizon {horizon}; location skipped")
            logger.warning(report.notices[-1])
            continue
        teams = filter_complete_teams(records, sorted(by_week), loc, horizon, probs.size)
        if not teams:
            report.notices.append(f"{loc}: no team submitted every week; location skipped")
            logger.warning(report.notices[-1])
            continue
        report.teams[loc] = teams
        jobs.append((loc, {w: {t: by_week[w][t] for t in teams} for w in by_week}, teams))
    args = (obs, methods, cfg, avs_eta, discount, int(horizon), int(n_mc), probs)
    if n_jobs == 1:
        parts = [_run_location(loc, bw, teams, *args) for loc, bw, teams in jobs]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(_run_location)(loc, bw, teams, *args) for loc, bw, teams in jobs)
    for scores, weights, notices in parts:
        report.scores += scores
        report.weights += weights
        report.notices += notices
    return report
