"""Study drivers: fit every weight rule per replicate and score the pools.

Reports are long-format rows ``(study, method, replicate, t, metric, value)``.
``t`` is the training sample size in the i.i.d. study and the forecast time
(week) in the sequential studies; per-replicate UWD1 of the sequential
studies uses ``t = "all"``.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ..baselines import ModelEvidencePanel, avs_weights, bma_weights, eqw_weights
from ..calibration import pit_histogram, uwd1
from ..distributions import Gaussian
from ..risk import RiskContext, ScorePanel, build_score_panel
from ..sampler import GibbsConfig, posterior_mean_weights, sample_posterior
from ..scoring import log_score, sample_crps_terms
from .components import fit_sir_components
from .config import DynamicStudyConfig, IidStudyConfig, SirStudyConfig
from .generators import gen_dynamic_mixture, gen_iid_mixture, gen_sir

logger = logging.getLogger(__name__)

METHODS = ("SGP", "SGP50", "AVS", "BMA", "EQW")
STUDIES = {"iid": IidStudyConfig, "dynamic": DynamicStudyConfig, "sir": SirStudyConfig}
STRONG_PRIOR = 50.0
LONG_HEADER = ("study", "method", "replicate", "t", "metric", "value")
SUMMARY_HEADER = ("study", "method", "t", "metric", "n", "mean", "median")
PIT_HEADER = ("study", "method", "bin_lower", "bin_upper", "count")

# named sub-streams of each replicate's seed sequence
_STREAMS = {"data": 0, "eval": 1, "mc": 2, "components": 3, "SGP": 4, "SGP50": 5}


def _stream_seed(seed, replicate, stream, *extra):
    ss = np.random.SeedSequence([int(seed), int(replicate), _STREAMS[stream], *map(int, extra)])
    return int(ss.generate_state(1)[0])


def _rng(seed, replicate, stream):
    return np.random.default_rng(_stream_seed(seed, replicate, stream))


def check_methods(methods):
    """Canonical upper-case method names; raises on unknown names."""
    out = []
    for m in methods:
        name = str(m).strip().upper()
        if name not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if name not in out:
            out.append(name)
    if not out:
        raise ValueError("no methods given")
    return tuple(out)


def method_weights(method, ctx, cfg, seed=0, replicate=0, tag=0):
    """Weights of one rule fitted on ``ctx``; ``ctx=None`` (no data yet) gives EQW.

    SGP runs use a seed derived from ``(seed, replicate, method, tag)``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if ctx is None:
        return None
    if method == "EQW":
        return eqw_weights(ctx.n_components)
    if method in ("SGP", "SGP50"):
        gcfg = GibbsConfig(
            eta=cfg.eta,
            dirichlet_alpha=STRONG_PRIOR if method == "SGP50" else 1.0,
            draws_per_chain=cfg.draws_per_chain,
            burn_in=cfg.burn_in,
            seed=_stream_seed(seed, replicate, method, tag),
        )
        return posterior_mean_weights(sample_posterior(ctx, gcfg))
    discount = ctx.discount if ctx.mode == "dynamic" else 1.0
    panel = ModelEvidencePanel.from_score_panel(ctx.panel, None, discount)
    if method == "AVS":
        return avs_weights(panel, cfg.avs_eta)
    return bma_weights(panel)


def _weights(method, ctx, n_components, cfg, seed, replicate, tag=0):
    w = method_weights(method, ctx, cfg, seed, replicate, tag)
    return eqw_weights(n_components) if w is None else w


def _pool_metrics(w, crps, pdf_row, cdf_row):
    pit = float(np.clip(cdf_row @ w, 0.0, 1.0))
    return {"crps": float(crps), "logs": float(log_score(max(pdf_row @ w, 0.0))), "pit": pit}


def _iid_replicate(cfg, methods, r):
    cands = [Gaussian(m, cfg.candidate_sd) for m in cfg.candidate_means]
    C = len(cands)
    rng_data, rng_eval = _rng(cfg.seed, r, "data"), _rng(cfg.seed, r, "eval")
    rows = []
    for n in cfg.sample_sizes:
        y = gen_iid_mixture(cfg, n, rng_data)
        ctx = RiskContext.from_forecasts(cands, y, mode="iid")
        y_eval = gen_iid_mixture(cfg, cfg.eval_draws, rng_eval)
        panel = build_score_panel(cands, y_eval)
        pdf = np.column_stack([c.pdf(y_eval) for c in cands])
        cdf = np.column_stack([c.cdf(y_eval) for c in cands])
        for method in methods:
            w = _weights(method, ctx, C, cfg, cfg.seed, r, n)
            pits = np.clip(cdf @ w, 0.0, 1.0)
            metrics = {
                "crps": float(panel.pool_crps(w).mean()),
                "logs": float(np.mean(log_score(np.maximum(pdf @ w, 0.0)))),
                "uwd1": uwd1(pits),
                "max_weight": float(w.max()),
            }
            rows += [(method, r, int(n), k, v) for k, v in metrics.items()]
    return rows


def _sequential_rows(methods, cfg, r, panel, pdf, cdf, times, mode_discount, first=0):
    """Refit each rule on rows ``< k`` and score row ``k``, for every ``k >= first``."""
    C = panel.n_components
    rows, pits = [], {m: [] for m in methods}
    for k in range(first, panel.n_times):
        ctx = None if k == 0 else RiskContext("dynamic", panel.subset(np.arange(k)), mode_discount)
        for method in methods:
            w = _weights(method, ctx, C, cfg, cfg.seed, r, k)
            crps = panel.abs_to_obs[k] @ w - 0.5 * w @ panel.cross_abs[k] @ w
            metrics = _pool_metrics(w, max(crps, 0.0), pdf[k], cdf[k])
            metrics["max_weight"] = float(w.max())
            pits[method].append(metrics["pit"])
            rows += [(method, r, times[k], name, v) for name, v in metrics.items()]
    rows += [(m, r, "all", "uwd1", uwd1(pits[m])) for m in methods]
    return rows


def _dynamic_replicate(cfg, methods, r):
    cands = [Gaussian(m, cfg.candidate_sd) for m in cfg.candidate_means]
    y, _ = gen_dynamic_mixture(cfg, _rng(cfg.seed, r, "data"))
    panel = build_score_panel([cands] * y.size, y)
    pdf = np.column_stack([c.pdf(y) for c in cands])
    cdf = np.column_stack([c.cdf(y) for c in cands])
    # row k is time k + 1; time 1 has no history and is not scored
    times = list(range(1, y.size + 1))
    return _sequential_rows(methods, cfg, r, panel, pdf, cdf, times, cfg.discount, first=1)


def _sir_replicate(cfg, methods, r):
    counts = gen_sir(cfg, _rng(cfg.seed, r, "data"))
    rng_comp, rng_mc = _rng(cfg.seed, r, "components"), _rng(cfg.seed, r, "mc")
    terms, loglik, pdf, cdf, times = [], [], [], [], []
    for week in range(cfg.fit_start_week, cfg.weeks):
        comps = fit_sir_components(counts[:week], cfg.population, rng_comp, cfg.n_samples)
        y = float(counts[week])
        terms.append(sample_crps_terms([c.samples for c in comps], y, rng_mc))
        dens = np.array([float(c.pdf(y)) for c in comps])
        pdf.append(dens)
        with np.errstate(divide="ignore"):
            loglik.append(np.log(dens))
        cdf.append(np.array([float(c.cdf(y)) for c in comps]))
        times.append(week + 1)
    panel = ScorePanel.stack(terms, np.array(loglik))
    return _sequential_rows(methods, cfg, r, panel, np.array(pdf), np.array(cdf), times, cfg.discount)


_REPLICATE = {"iid": _iid_replicate, "dynamic": _dynamic_replicate, "sir": _sir_replicate}


@dataclass
class StudyReport:
    """Long-format study results with summary and PIT-histogram views."""

    study: str
    methods: tuple
    config: object
    rows: list = field(default_factory=list)

    def values(self, method, metric, t=None):
        """Values of ``metric`` for ``method`` (optionally at one ``t``)."""
        return np.array([
            v for m, _, tt, k, v in self.rows
            if m == method and k == metric and (t is None or tt == t)
        ])

    def long_rows(self):
        return [(self.study, m, r, t, k, v) for m, r, t, k, v in self.rows]

    def summary_rows(self):
        """Mean and median per (method, t, metric); metrics recorded at
        several t also get a ``t = "all"`` row pooling every value."""
        groups = {}
        for m, _, t, k, v in self.rows:
            groups.setdefault((m, k), {}).setdefault(t, []).append(v)
        out = []
        for (m, k), by_t in sorted(groups.items(), key=lambda x: (self.methods.index(x[0][0]), x[0][1])):
            per_t = sorted((t for t in by_t if t != "all"), key=float)
            for t in per_t:
                out.append(_summarize(self.study, m, t, k, by_t[t]))
            if "all" in by_t:
                out.append(_summarize(self.study, m, "all", k, by_t["all"]))
            elif len(per_t) > 1:
                out.append(_summarize(self.study, m, "all", k, [v for t in per_t for v in by_t[t]]))
        return out

    def summary(self, method, metric, t="all", stat="mean"):
        for _, m, tt, k, _, mean, median in self.summary_rows():
            if m == method and k == metric and tt == t:
                return mean if stat == "mean" else median
        raise KeyError((method, metric, t))

    def pit_rows(self, bins=10):
        edges = np.linspace(0.0, 1.0, bins + 1)
        out = []
        for method in self.methods:
            pits = self.values(method, "pit")
            if pits.size == 0:
                continue
            counts = pit_histogram(pits, bins)
            out += [(self.study, method, float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]
        return out

    def write(self, outdir, prefix=None):
        """Write ``<prefix>_long.csv``, ``<prefix>_summary.csv`` and
        ``<prefix>_pit_histogram.csv``; returns the paths."""
        from pathlib import Path

        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        prefix = prefix or self.study
        paths = {
            "long": outdir / f"{prefix}_long.csv",
            "summary": outdir / f"{prefix}_summary.csv",
            "pit_histogram": outdir / f"{prefix}_pit_histogram.csv",
        }
        write_csv(paths["long"], LONG_HEADER, self.long_rows())
        write_csv(paths["summary"], SUMMARY_HEADER, self.summary_rows())
        write_csv(paths["pit_histogram"], PIT_HEADER, self.pit_rows())
        return paths


def _summarize(study, method, t, metric, values):
    vals = np.asarray(values, dtype=float)
    return (study, method, t, metric, vals.size, float(vals.mean()), float(np.median(vals)))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def make_config(study, config=None, **overrides):
    """Study config from defaults, an optional base config and overrides."""
    if study not in STUDIES:
        raise ValueError(f"unknown study {study!r}; choose from {', '.join(STUDIES)}")
    cls = STUDIES[study]
    cfg = config if config is not None else cls()
    if not isinstance(cfg, cls):
        raise TypeError(f"{study} study needs a {cls.__name__}")
    unknown = set(overrides) - set(cls.field_names())
    if unknown:
        raise ValueError(f"unknown {study} settings: {', '.join(sorted(unknown))}")
    return cfg.replace(**overrides) if overrides else cfg


def run_study(study, methods=METHODS, config=None, n_jobs=1, **overrides):
    """Run one of the simulation studies.

    Parameters
    ----------
    study : {"iid", "dynamic", "sir"}
    methods : iterable of str
        Subset of SGP, SGP50, AVS, BMA, EQW (case-insensitive).
    config : IidStudyConfig, DynamicStudyConfig or SirStudyConfig, optional
    n_jobs : int
        Worker processes across replicates.
    **overrides
        Config fields to replace (e.g. ``replicates=10``).

    Returns
    -------
    StudyReport
        Rows ordered by replicate regardless of execution order.
    """
    methods = check_methods(methods)
    cfg = make_config(study, config, **overrides)
    if study == "sir":
        cfg.check_epidemic()
    work = _REPLICATE[study]
    logger.info("running %s study: %d replicates, methods %s", study, cfg.replicates, ",".join(methods))
    if n_jobs == 1:
        parts = [work(cfg, methods, r) for r in range(cfg.replicates)]
    else:
        parts = Parallel(n_jobs=n_jobs)(delayed(work)(cfg, methods, r) for r in range(cfg.replicates))
    rows = [row for part in parts for row in part]
    return StudyReport(study, methods, cfg, rows)
