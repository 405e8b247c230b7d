import numpy as np
import pytest

from stackgibbs.distributions import Empirical
from stackgibbs.simkit import (
    COMPONENT_NAMES, DynamicStudyConfig, IidStudyConfig, SirStudyConfig, fit_sir_components,
    gen_dynamic_mixture, gen_iid_mixture, gen_sir, make_config, run_study,
)

TINY = dict(draws_per_chain=600, burn_in=200)


# -- generators ------------------------------------------------------------------------


def test_iid_degenerate_mixture():
    y = gen_iid_mixture(IidStudyConfig(nu=1.0), 20_000, np.random.default_rng(0))
    assert abs(y.mean() - 3.0) < 0.03 and abs(y.std() - 1.0) < 0.03


def test_iid_mixture_mean_and_determinism():
    y = gen_iid_mixture(IidStudyConfig(), 100_000, np.random.default_rng(1))
    assert abs(y.mean() - 4.225) < 0.02
    np.testing.assert_array_equal(y, gen_iid_mixture(IidStudyConfig(), 100_000, np.random.default_rng(1)))


def test_iid_rejects_bad_n():
    with pytest.raises(ValueError):
        gen_iid_mixture(IidStudyConfig(), 0)


def test_dynamic_frozen_walk():
    _, w = gen_dynamic_mixture(DynamicStudyConfig(sigma2=0.0), np.random.default_rng(0))
    np.testing.assert_allclose(w, np.tile([0.65, 0.35], (50, 1)), rtol=1e-12)


def test_dynamic_weights_on_simplex_first_row_exact():
    y, w = gen_dynamic_mixture(DynamicStudyConfig(sigma2=0.5), np.random.default_rng(2))
    assert y.shape == (50,) and w.shape == (50, 2)
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(w > 0)
    assert tuple(w[0]) == (0.65, 0.35)


@pytest.mark.parametrize("method", ["tau_leap", "gillespie"])
def test_sir_no_transmission_is_nonincreasing(method):
    I = gen_sir(SirStudyConfig(beta=0.0, method=method, weeks=20), np.random.default_rng(0))
    assert np.all(np.diff(I) <= 0)


@pytest.mark.parametrize("method", ["tau_leap", "gillespie"])
def test_sir_no_recovery_infects_everyone(method):
    cfg = SirStudyConfig(population=500, initial_infected=10, beta=20.0, gamma=0.0, weeks=10, method=method)
    I = gen_sir(cfg, np.random.default_rng(1))
    assert I[-1] == 500


def test_sir_counts_bounded_integers():
    I = gen_sir(SirStudyConfig(), np.random.default_rng(3))
    assert I.dtype.kind == "i" and I.shape == (35,)
    assert np.all((I >= 0) & (I <= 10_000))


def test_sir_single_wave_peak_location():
    cfg = SirStudyConfig(beta=0.4, gamma=0.2)
    ok = 0
    for seed in range(100):
        I = gen_sir(cfg, np.random.default_rng(seed))
        peak = int(np.argmax(I)) + 1
        if 3 <= peak <= 30 and I[-1] < I.max():
            ok += 1
    assert ok >= 90


def test_sir_deterministic():
    cfg = SirStudyConfig(method="gillespie", population=2000, initial_infected=20)
    np.testing.assert_array_equal(gen_sir(cfg, 5), gen_sir(cfg, 5))


@pytest.mark.parametrize("kw", [
    {"fit_start_week": 40}, {"dt": 0.1}, {"method": "euler"}, {"initial_infected": 20_000}, {"replicates": 0},
])
def test_sir_config_validation(kw):
    with pytest.raises(ValueError):
        SirStudyConfig(**kw)


def test_iid_and_dynamic_config_validation():
    with pytest.raises(ValueError):
        IidStudyConfig(comp_sds=(1.0, 0.0))
    with pytest.raises(ValueError):
        DynamicStudyConfig(T=1)
    with pytest.raises(ValueError):
        DynamicStudyConfig(w_init=(0.5, 0.6))


# -- components --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def wave_components():
    history = gen_sir(SirStudyConfig(), np.random.default_rng(4))[:12]
    return fit_sir_components(history, 10_000, np.random.default_rng(0))


def test_components_contract(wave_components):
    assert len(wave_components) == len(COMPONENT_NAMES) == 4
    for c in wave_components:
        assert isinstance(c, Empirical)
        assert c.samples.size == 10_000
        assert np.all(np.isfinite(c.samples)) and np.all(c.samples >= 0)


def test_constant_history_random_walk_centred():
    comps = fit_sir_components([50] * 8, 10_000, np.random.default_rng(0))
    rw = comps[COMPONENT_NAMES.index("rw_drift")]
    assert np.median(rw.samples) == pytest.approx(50.0, rel=0.01)


def test_components_short_history():
    with pytest.raises(ValueError, match="4 weeks"):
        fit_sir_components([1, 2, 3], 100)


def test_components_reject_negative_counts():
    with pytest.raises(ValueError):
        fit_sir_components([1, 2, -3, 4], 100)


# -- study driver ----------------------------------------------------------------------------


def test_eqw_row_shape_dynamic():
    rep = run_study("dynamic", ["EQW"], replicates=1, T=6)
    crps = [(r, t) for m, r, t, k, _ in rep.rows if k == "crps"]
    assert crps == [(0, t) for t in range(2, 7)]
    assert len(rep.values("EQW", "uwd1")) == 1


def test_eqw_row_shape_iid():
    rep = run_study("iid", ["eqw"], replicates=1, sample_sizes=(10, 20), eval_draws=50)
    assert sorted(rep.values("EQW", "crps").shape) == [2]
    np.testing.assert_allclose(rep.values("EQW", "max_weight"), 1 / 6)


def test_report_deterministic_and_written(tmp_path):
    kw = dict(replicates=2, T=5, seed=3, **TINY)
    a = run_study("dynamic", ["SGP", "AVS"], **kw).write(tmp_path / "a")
    b = run_study("dynamic", ["SGP", "AVS"], **kw).write(tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_parallel_matches_serial():
    kw = dict(replicates=2, T=5, seed=1, **TINY)
    serial = run_study("dynamic", ["SGP", "BMA"], **kw)
    parallel = run_study("dynamic", ["SGP", "BMA"], n_jobs=2, **kw)
    assert serial.rows == parallel.rows


def test_sgp50_uses_strong_prior_and_stays_near_uniform():
    rep = run_study("sir", ["SGP50", "SGP"], replicates=1, weeks=10, fit_start_week=5, n_samples=500, **TINY)
    mw50 = rep.values("SGP50", "max_weight")
    assert mw50.shape == (5,)
    assert np.all(mw50 < 0.3)


def test_summary_has_mean_and_median():
    rep = run_study("iid", ["EQW", "BMA"], replicates=3, sample_sizes=(20,), eval_draws=100)
    vals = rep.values("BMA", "crps", 20)
    assert rep.summary("BMA", "crps", 20) == pytest.approx(vals.mean())
    assert rep.summary("BMA", "crps", 20, stat="median") == pytest.approx(np.median(vals))
    assert sum(r[-1] for r in rep.pit_rows()) == 0  # iid study records uwd1, not per-point PIT


@pytest.mark.parametrize("bad", [["XYZ"], []])
def test_unknown_or_empty_methods(bad):
    with pytest.raises(ValueError):
        run_study("iid", bad, replicates=1)


def test_make_config_errors():
    with pytest.raises(ValueError):
        make_config("nope")
    with pytest.raises(ValueError, match="unknown"):
        make_config("iid", bogus=1)
    with pytest.raises(TypeError):
        make_config("iid", DynamicStudyConfig())


def test_sir_study_needs_epidemic():
    with pytest.raises(ValueError, match="gamma < beta"):
        run_study("sir", ["EQW"], replicates=1, beta=0.1, gamma=0.2)
