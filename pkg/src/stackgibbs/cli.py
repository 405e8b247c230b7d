"""Command-line entry point.

Subcommands::

    score      score component forecasts against observations (crps, logs, wis)
    fit        SGP / AVS / BMA / EQW weights from forecast and truth files
    simulate   run the iid, dynamic or sir simulation study
    hub        run the weekly hub ensemble pipeline
    diagnose   R-hat / ESS report of a multi-chain SGP fit
    tune-eta   cross-validated choice of the learning rate
    replay     rerun the command recorded in a run manifest

Every subcommand accepts ``--config FILE`` with ``key = value`` lines; keys
are flag names (``draws`` or ``burn-in``), flags given on the command line
win. For ``simulate`` and ``hub --synthetic`` other keys set study or
archive fields. Exit codes: 0 success, 1 invalid input, 2 I/O failure.

Forecast files are CSV, one row per component (and time) with a
``component`` column and one of three layouts:

* ``mu, sigma`` -- Gaussian forecasts,
* ``prob, value`` -- quantile sets (one row per quantile),
* ``sample`` -- sample sets (one row per draw).

An optional ``t`` column makes the forecasts time-specific; without it the
same components forecast every observation. Truth files have columns ``y``
and, for time-specific forecasts, ``t``.
"""

import argparse
import csv
import dataclasses
import json
import logging
import os
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import eqw_weights
from .distributions import Empirical, Gaussian, LinearPool, quantiles_to_piecewise_cdf
from .estimators import COMBINERS
from .hub import (
    FLUSIGHT_PROBS, HUB_METHODS, DEFAULT_HUB_METHODS, parse_hub_csv, parse_truth_csv,
    run_hub_pipeline, write_hub_csv, write_truth_csv,
)
from .risk import DEFAULT_DISCOUNT, RiskContext
from .sampler import GibbsConfig, diagnostics, sample_posterior, cross_validate_eta
from .scoring import QuantileForecast, crps_normal, log_score, sample_crps_terms, weighted_interval_score
from .simkit.hubsynth import SyntheticHubConfig, synthetic_hub_archive
from .simkit.studies import METHODS, STUDIES, check_methods, run_study, write_csv

logger = logging.getLogger("stackgibbs")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
SCORE_HEADER = ("t", "component", "rule", "value")
CRPS_GRID = 10_000


class UsageError(ValueError):
    """Bad command line; reported with the usage text."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_usage()}")


# -- config files --------------------------------------------------------------


def read_config(path):
    """``{key: value}`` from a file of ``key = value`` lines (``#`` comments)."""
    out = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}, line {n}: expected key = value, got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _coerce(value, default):
    """Convert config text to the type of ``default``."""
    if not isinstance(value, str):
        return value
    if isinstance(default, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        kind = int if default and all(isinstance(x, int) for x in default) else float
        return tuple(kind(x) for x in value.replace(";", ",").split(",") if x.strip())
    return value


def _dataclass_overrides(cls, values):
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    unknown = set(values) - set(defaults)
    if unknown:
        raise ValueError(f"unknown settings for {cls.__name__}: {', '.join(sorted(unknown))}")
    return {k: _coerce(v, defaults[k]) for k, v in values.items()}


def _merge_config(args, parser_actions):
    """Fill flags left unset from ``--config``; returns the unused keys."""
    if not getattr(args, "config", None):
        return {}
    cfg = read_config(args.config)
    extra = {}
    for key, value in cfg.items():
        action = parser_actions.get(key)
        if action is None:
            extra[key] = value
        elif getattr(args, key) is None:
            conv = action.type or str
            setattr(args, key, conv(value))
    return extra


# -- manifests -----------------------------------------------------------------


def _versions():
    import numba
    import scipy
    import sklearn

    return {
        "stackgibbs": __version__, "python": platform.python_version(), "numpy": np.__version__,
        "scipy": scipy.__version__, "scikit-learn": sklearn.__version__, "numba": numba.__version__,
    }


def _jsonable(x):
    if dataclasses.is_dataclass(x):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(x).items()}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    return x


def write_manifest(outdir, command, argv, resolved, seed, outputs, started):
    """Write ``<command>_manifest.json`` next to the outputs; returns its path."""
    path = Path(outdir) / f"{command}_manifest.json"
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": _jsonable(resolved),
        "seed": seed,
        "versions": _versions(),
        "started": started,
        "finished": _now(),
        "outputs": sorted(str(p) for p in outputs),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- forecast files ------------------------------------------------------------


def load_forecasts(path):
    """Read a forecast file.

    Returns
    -------
    times : list or None
        Time labels in file order, or None for shared components.
    names : list of str
        Component names in file order.
    forecasts : list
        Components (shared) or one component list per time.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or [])
        rows = list(reader)
    if "component" not in cols:
        raise ValueError(f"{path}: missing column 'component'")
    if {"mu", "sigma"} <= cols:
        kind = "gaussian"
    elif {"prob", "value"} <= cols:
        kind = "quantile"
    elif "sample" in cols:
        kind = "sample"
    else:
        raise ValueError(f"{path}: need columns mu,sigma or prob,value or sample")
    timed = "t" in cols
    parts, names, times = {}, [], []
    for n, row in enumerate(rows, 2):
        t = row["t"].strip() if timed else None
        name = row["component"].strip()
        if name not in names:
            names.append(name)
        if t not in times:
            times.append(t)
        try:
            vals = ((float(row["mu"]), float(row["sigma"])) if kind == "gaussian"
                    else (float(row["prob"]), float(row["value"])) if kind == "quantile"
                    else (float(row["sample"]),))
        except ValueError:
            raise ValueError(f"{path}, row {n}: non-numeric value") from None
        parts.setdefault((t, name), []).append(vals)
    if not rows:
        raise ValueError(f"{path}: no forecasts")

    def build(vals):
        if kind == "gaussian":
            if len(vals) != 1:
                raise ValueError(f"{path}: one mu,sigma row per component and time expected")
            return Gaussian(*vals[0])
        if kind == "quantile":
            vals = sorted(vals)
            return quantiles_to_piecewise_cdf([p for p, _ in vals], [v for _, v in vals])
        return Empirical(np.array([v[0] for v in vals]))

    out = []
    for t in times:
        missing = [c for c in names if (t, c) not in parts]
        if missing:
            raise ValueError(f"{path}: time {t} lacks components {', '.join(missing)}")
        out.append([build(parts[(t, c)]) for c in names])
    if not timed:
        return None, names, out[0]
    return times, names, out


def load_truth(path, times):
    """Observations aligned with ``times`` (file order when ``times`` is None)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or [])
        rows = list(reader)
    if "y" not in cols:
        raise ValueError(f"{path}: missing column 'y'")
    try:
        if times is None:
            return np.array([float(r["y"]) for r in rows])
        if "t" not in cols:
            raise ValueError(f"{path}: time-specific forecasts need a 't' column in the truth file")
        by_t = {r["t"].strip(): float(r["y"]) for r in rows}
    except ValueError as err:
        raise ValueError(f"{path}: {err}") from None
    missing = [t for t in times if t not in by_t]
    if missing:
        raise ValueError(f"{path}: no observation for t = {', '.join(missing[:5])}")
    return np.array([by_t[t] for t in times])


def _component_scores(comp, y, rule):
    if rule == "logs":
        return log_score(float(comp.pdf(y)))
    if rule == "wis":
        if hasattr(comp, "probs") and hasattr(comp, "quantiles"):
            probs, vals = comp.probs, comp.quantiles
        else:
            probs = np.asarray(FLUSIGHT_PROBS)
            vals = comp.ppf(probs)
        return weighted_interval_score(QuantileForecast(probs, vals), y)
    if isinstance(comp, Gaussian):
        return crps_normal(comp.mu, comp.sigma, y)
    return _grid_crps(comp, y)


def _grid_crps(dist, y):
    if isinstance(dist, Empirical):
        draws = dist.samples
    else:
        draws = dist.ppf((np.arange(CRPS_GRID) + 0.5) / CRPS_GRID)
    return max(float(sample_crps_terms([draws], y, pairing="all").crps(np.ones(1))), 0.0)


def _pool_score(pool, y, rule):
    if rule == "logs":
        return log_score(float(pool.pdf(y)))
    if rule == "wis":
        probs = np.asarray(FLUSIGHT_PROBS)
        vals = np.array([_pool_quantile(pool, p) for p in probs])
        return weighted_interval_score(QuantileForecast(probs, vals), y)
    draws = [c.samples if isinstance(c, Empirical) else c.ppf((np.arange(CRPS_GRID) + 0.5) / CRPS_GRID)
             for c in pool.components]
    if all(isinstance(c, Gaussian) for c in pool.components):
        from .scoring import crps_normal_mixture

        return crps_normal_mixture([c.mu for c in pool.components], [c.sigma for c in pool.components],
                                   pool.weights, y)
    return max(float(sample_crps_terms(draws, y, pairing="all").crps(pool.weights)), 0.0)


def _pool_quantile(pool, p):
    from scipy.optimize import brentq

    lo = min(float(c.ppf(1e-6)) for c in pool.components) - 1.0
    hi = max(float(c.ppf(1 - 1e-6)) for c in pool.components) + 1.0
    return brentq(lambda x: float(pool.cdf(x)) - p, lo, hi, xtol=1e-10)


def _parse_weights(text, n):
    w = np.array([float(x) for x in text.split(",")])
    if w.size != n:
        raise ValueError(f"--weights has {w.size} entries for {n} components")
    return w


def _split(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


# -- subcommands ---------------------------------------------------------------


def _emit(rows, header, out, name):
    """Write rows to ``out/name`` or print them as CSV; returns written paths."""
    if out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return []
    Path(out).mkdir(parents=True, exist_ok=True)
    path = Path(out) / name
    write_csv(path, header, rows)
    return [path]


def cmd_score(args):
    times, names, forecasts = load_forecasts(args.forecasts)
    y = load_truth(args.truth, times)
    per_time = [forecasts] * y.size if times is None else forecasts
    labels = times if times is not None else [str(i) for i in range(y.size)]
    weights = _parse_weights(args.weights, len(names)) if args.weights else None
    rules = _split(args.rule or "crps")
    for r in rules:
        if r not in ("crps", "logs", "wis"):
            raise ValueError(f"unknown rule {r!r}; choose from crps, logs, wis")
    rows = []
    for t, comps, obs in zip(labels, per_time, y):
        for rule in rules:
            rows += [(t, name, rule, float(_component_scores(c, obs, rule))) for name, c in zip(names, comps)]
            if weights is not None:
                rows.append((t, "pool", rule, float(_pool_score(LinearPool(tuple(comps), weights), obs, rule))))
    return _emit(rows, SCORE_HEADER, args.out, "scores.csv"), {"rules": rules}


def _gibbs_cfg(args, chains_default=1):
    return GibbsConfig(
        eta=args.eta if args.eta is not None else 1.0,
        dirichlet_alpha=args.alpha,
        chains=args.chains if args.chains is not None else chains_default,
        draws_per_chain=args.draws if args.draws is not None else 60_000,
        burn_in=args.burn_in if args.burn_in is not None else 10_000,
        seed=args.seed if args.seed is not None else 0,
        sampler=args.sampler or "hmc",
    )


def _context(args):
    times, names, forecasts = load_forecasts(args.forecasts)
    y = load_truth(args.truth, times)
    mode = args.mode or ("iid" if times is None else "dynamic")
    discount = args.discount if args.discount is not None else DEFAULT_DISCOUNT
    seed = args.seed if args.seed is not None else 0
    if times is None and mode == "dynamic":
        forecasts = [forecasts] * y.size
    return names, RiskContext.from_forecasts(forecasts, y, mode=mode, discount=discount, rng=seed)


def cmd_fit(args):
    method = args.method.lower()
    if method not in COMBINERS:
        raise ValueError(f"unknown method {args.method!r}; choose from {', '.join(COMBINERS)}")
    if args.forecasts is None:
        if method != "eqw" or args.components is None:
            raise UsageError("fit needs --forecasts and --truth (or --method eqw --components N)")
        if args.components < 1:
            raise ValueError("--components must be >= 1")
        names = [f"c{j + 1}" for j in range(args.components)]
        weights = eqw_weights(args.components)
        resolved = {"method": method, "components": args.components}
    else:
        if args.truth is None:
            raise UsageError("fit needs --truth with --forecasts")
        names, ctx = _context(args)
        if method == "sgp":
            cfg = _gibbs_cfg(args)
            est = COMBINERS["sgp"](**{k: getattr(cfg, k) for k in
                                      ("eta", "dirichlet_alpha", "chains", "draws_per_chain", "burn_in", "seed", "sampler")})
        elif method == "avs":
            est = COMBINERS["avs"](eta=args.eta if args.eta is not None else 1.0)
        else:
            est = COMBINERS[method]()
        weights = est.fit_context(ctx).weights_
        resolved = {"method": method, "mode": ctx.mode, "discount": ctx.discount, "params": est.get_params()}
    rows = [(n, float(w)) for n, w in zip(names, weights)]
    return _emit(rows, ("component", "weight"), args.out, "weights.csv"), resolved


def cmd_simulate(args, extra):
    study = args.study
    if study not in STUDIES:
        raise UsageError(f"unknown study {study!r}; choose from {', '.join(STUDIES)}")
    methods = check_methods(_split(args.methods)) if args.methods else METHODS
    overrides = dict(extra)
    overrides.update(_parse_set(args.set))
    for flag, name in (("replicates", "replicates"), ("seed", "seed"), ("eta", "eta"),
                       ("draws", "draws_per_chain"), ("burn_in", "burn_in")):
        if getattr(args, flag) is not None:
            overrides[name] = getattr(args, flag)
    overrides = _dataclass_overrides(STUDIES[study], overrides)
    report = run_study(study, methods, n_jobs=_threads(args), **overrides)
    outdir = Path(args.out or ".")
    paths = report.write(outdir, study)
    for _, m, t, metric, n, mean, median in report.summary_rows():
        if t == "all" or (study == "iid" and metric == "crps"):
            logger.info("%s t=%s %s mean=%.4f median=%.4f (n=%d)", m, t, metric, mean, median, n)
    return list(paths.values()), {"study": study, "methods": methods, "study_config": report.config}


def cmd_hub(args, extra):
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    settings = {}
    if args.synthetic:
        scfg = SyntheticHubConfig(**_dataclass_overrides(SyntheticHubConfig, {**extra, **_parse_set(args.set)}))
        records, truth = synthetic_hub_archive(scfg)
        written += [outdir / "synthetic_forecasts.csv", outdir / "synthetic_truth.csv"]
        write_hub_csv(written[0], records)
        write_truth_csv(written[1], truth)
        settings["synthetic"] = scfg
    else:
        if extra:
            raise ValueError(f"unknown config keys: {', '.join(sorted(extra))}")
        if args.forecasts is None or args.truth is None:
            raise UsageError("hub needs --forecasts and --truth (or --synthetic)")
        records, truth = parse_hub_csv(args.forecasts), parse_truth_csv(args.truth)
    methods = _split(args.methods) if args.methods else DEFAULT_HUB_METHODS
    cfg = _gibbs_cfg(args)
    report = run_hub_pipeline(
        records, truth, cfg, methods,
        avs_eta=args.avs_eta if args.avs_eta is not None else 1.0,
        discount=args.discount if args.discount is not None else DEFAULT_DISCOUNT,
        horizon=args.horizon or 1,
        n_mc=args.n_mc or 10_000,
        n_jobs=_threads(args),
    )
    for note in report.notices:
        logger.warning(note)
    written += list(report.write(outdir).values())
    settings.update({"gibbs": cfg, "methods": report.methods})
    return written, settings


def cmd_diagnose(args):
    names, ctx = _context(args)
    cfg = _gibbs_cfg(args, chains_default=4)
    if cfg.chains < 2:
        raise ValueError("diagnose needs at least 2 chains")
    draws = sample_posterior(ctx, cfg)
    diag = diagnostics(draws)
    rows = [(n, float(r), float(e), float(w)) for n, r, e, w in
            zip(names, diag.rhat, diag.ess, draws.draws.mean(axis=0))]
    logger.info("max R-hat %.6f, min ESS %.0f, acceptance %.3f", diag.max_rhat, diag.min_ess, diag.accept_rate)
    print(f"max_rhat={diag.max_rhat:.6f} min_ess={diag.min_ess:.1f} accept_rate={diag.accept_rate:.3f}",
          file=sys.stderr if args.out is None else sys.stdout)
    paths = _emit(rows, ("component", "rhat", "ess", "posterior_mean"), args.out, "diagnostics.csv")
    return paths, {"gibbs": cfg, "mode": ctx.mode}


def cmd_tune_eta(args):
    names, ctx = _context(args)
    grid = [float(g) for g in _split(args.grid or "0.5,1,2,5,10,20")]
    folds = args.folds if args.folds is not None else 5
    cfg = _gibbs_cfg(args)
    scores = cross_validate_eta(ctx, grid, folds, cfg)
    best = min(zip(scores, grid))[1]
    rows = [(g, float(s)) for g, s in zip(grid, scores)]
    paths = _emit(rows, ("eta", "cv_crps"), args.out, "tune_eta.csv")
    print(f"best_eta={best!r}", file=sys.stderr if args.out is None else sys.stdout)
    return paths, {"grid": grid, "folds": folds, "gibbs": cfg, "best_eta": best}


def _threads(args):
    return int(args.threads) if args.threads else (os.cpu_count() or 1)


# -- parser --------------------------------------------------------------------


def _common(p, sampler=False, data=False):
    p.add_argument("--config", help="key = value settings file; flags win")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--out", help="output directory (default: print to stdout)")
    if data:
        p.add_argument("--forecasts", help="forecast CSV")
        p.add_argument("--truth", help="truth CSV")
        p.add_argument("--mode", choices=("iid", "dynamic"), help="risk type (default from file layout)")
        p.add_argument("--discount", type=float, help="dynamic discount (default 0.98)")
    if sampler:
        p.add_argument("--eta", type=float, help="learning rate (default 1)")
        p.add_argument("--alpha", type=float, help="Dirichlet prior parameter (default 1)")
        p.add_argument("--chains", type=int, help="MCMC chains")
        p.add_argument("--draws", type=int, help="iterations per chain incl. burn-in (default 60000)")
        p.add_argument("--burn-in", type=int, dest="burn_in", help="burn-in iterations (default 10000)")
        p.add_argument("--sampler", choices=("hmc", "rwm"), help="MCMC kernel (default hmc)")


def build_parser():
    parser = _Parser(prog="stackgibbs", description="Stacked Gibbs posterior forecast ensembles.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    parser.add_argument("--version", action="version", version=f"stackgibbs {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("score", help="score forecasts against observations")
    _common(p, data=True)
    p.add_argument("--rule", help="comma list of crps, logs, wis (default crps)")
    p.add_argument("--weights", help="comma list of pool weights; adds pool rows")

    p = sub.add_parser("fit", help="fit ensemble weights")
    _common(p, sampler=True, data=True)
    p.add_argument("--method", required=True, help="sgp, avs, bma or eqw")
    p.add_argument("--components", type=int, help="component count (eqw without data)")

    p = sub.add_parser("simulate", help="run a simulation study")
    p.add_argument("study", help="iid, dynamic or sir")
    _common(p)
    p.add_argument("--replicates", type=int)
    p.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--eta", type=float, help="SGP learning rate")
    p.add_argument("--draws", type=int, help="iterations per SGP fit incl. burn-in")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--set", action="append", help="study field override key=value (repeatable)")

    p = sub.add_parser("hub", help="run the hub ensemble pipeline")
    _common(p, sampler=True)
    p.add_argument("--forecasts", help="hub quantile CSV")
    p.add_argument("--truth", help="truth CSV (location, date, value)")
    p.add_argument("--synthetic", action="store_true", help="generate and use a synthetic archive")
    p.add_argument("--methods", help=f"comma list from {','.join(HUB_METHODS)}")
    p.add_argument("--avs-eta", type=float, dest="avs_eta")
    p.add_argument("--discount", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--n-mc", type=int, dest="n_mc", help="quantile grid size per team (default 10000)")
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--set", action="append", help="synthetic archive field key=value (repeatable)")

    p = sub.add_parser("diagnose", help="R-hat / ESS of a multi-chain SGP fit")
    _common(p, sampler=True, data=True)

    p = sub.add_parser("tune-eta", help="cross-validate the learning rate")
    _common(p, sampler=True, data=True)
    p.add_argument("--grid", help="comma list of eta values (default 0.5,1,2,5,10,20)")
    p.add_argument("--folds", type=int, help="cross-validation folds (default 5)")

    p = sub.add_parser("replay", help="rerun a recorded command")
    p.add_argument("manifest", help="run manifest JSON")
    p.add_argument("--out", help="write outputs here instead of the recorded directory")
    return parser


_COMMANDS = {
    "score": lambda a, e: cmd_score(a), "fit": lambda a, e: cmd_fit(a), "simulate": cmd_simulate,
    "hub": cmd_hub, "diagnose": lambda a, e: cmd_diagnose(a), "tune-eta": lambda a, e: cmd_tune_eta(a),
}
_ACCEPTS_EXTRA = ("simulate", "hub")


def _replay(args):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = list(manifest["argv"])
    if args.out:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = args.out
        else:
            argv += ["--out", args.out]
    return dispatch(argv)


def dispatch(argv):
    """Run one command line; returns the exit code."""
    argv = list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
        if args.command is None:
            raise UsageError(parser.format_usage())
        if args.command == "replay":
            return _replay(args)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
        extra = _merge_config(args, actions)
        if extra and args.command not in _ACCEPTS_EXTRA:
            raise ValueError(f"unknown config keys: {', '.join(sorted(extra))}")
        started = _now()
        outputs, resolved = _COMMANDS[args.command](args, extra)
        if outputs:
            seed = args.seed if args.seed is not None else 0
            settings = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
            write_manifest(Path(outputs[0]).parent, args.command, argv,
                           {"args": settings, "resolved": resolved}, seed, outputs, started)
        return EXIT_OK
    except UsageError as err:
        print(str(err).rstrip(), file=sys.stderr)
        return EXIT_INVALID
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except OSError as err:
        print(f"stackgibbs: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as err:
        print(f"stackgibbs: invalid input: {err}", file=sys.stderr)
        return EXIT_INVALID


def main(argv=None):
    sys.exit(dispatch(sys.argv[1:] if argv is None else argv))
