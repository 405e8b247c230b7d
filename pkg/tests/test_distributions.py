import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from stackgibbs.distributions import (
    Empirical, Gaussian, LinearPool, PiecewiseCDF, default_tail_rate, eval_cdf, pool_cdf,
    quantiles_to_piecewise_cdf, sample,
)
from stackgibbs.hub import FLUSIGHT_PROBS


# -- worked examples -------------------------------------------------------------


def test_gaussian_cdf_at_mean():
    assert eval_cdf(Gaussian(0, 1), 0.0) == 0.5


def test_empirical_cdf_beyond_samples():
    assert eval_cdf(Empirical([1, 2, 3]), 10.0) == 1.0


def test_piecewise_cdf_interpolates_between_knots():
    f = PiecewiseCDF([0.25, 0.75], [1, 3], 1.0)
    assert eval_cdf(f, 2.0) == pytest.approx(0.5)


def test_pool_cdf_degenerate_weight():
    pool = LinearPool((Gaussian(0, 1), Gaussian(5, 1)), [1.0, 0.0])
    assert pool_cdf(pool, 0.0) == 0.5


def test_pool_cdf_identical_components():
    pool = LinearPool((Gaussian(0, 1), Gaussian(0, 1)), [0.5, 0.5])
    assert pool_cdf(pool, 0.0) == pytest.approx(0.5)


def test_pool_cdf_study_mixture():
    pool = LinearPool((Gaussian(3, 1), Gaussian(6.5, 1)), [0.65, 0.35])
    assert pool_cdf(pool, 3.0) == pytest.approx(0.65 * 0.5 + 0.35 * norm.cdf(-3.5), abs=1e-15)


def test_sample_tiny_sigma():
    draws = sample(Gaussian(0, 1e-12), 3, np.random.default_rng(0))
    np.testing.assert_allclose(draws, 0.0, atol=1e-10)


def test_empirical_needs_two_samples():
    with pytest.raises(ValueError):
        Empirical([5.0])


def test_sample_mean_law_of_large_numbers():
    draws = sample(Gaussian(3, 1), 100_000, np.random.default_rng(1))
    assert abs(draws.mean() - 3.0) < 0.02


def test_sample_deterministic_given_seed():
    f = quantiles_to_piecewise_cdf([0.1, 0.5, 0.9], [0, 1, 3])
    np.testing.assert_array_equal(sample(f, 5, 42), sample(f, 5, 42))


def test_quantile_reconstruction_needs_two_points():
    with pytest.raises(ValueError):
        quantiles_to_piecewise_cdf([0.5], [7])


def test_quantile_reconstruction_passes_through_knot():
    f = quantiles_to_piecewise_cdf([0.25, 0.5, 0.75], [1, 2, 3])
    assert eval_cdf(f, 2.0) == pytest.approx(0.5)


def test_flusight_normal_quantiles_track_normal_cdf():
    p = np.array(FLUSIGHT_PROBS)
    f = quantiles_to_piecewise_cdf(p, norm.ppf(p))
    x = np.linspace(-1.5, 1.5, 301)
    assert np.max(np.abs(f.cdf(x) - norm.cdf(x))) < 0.01


@pytest.mark.parametrize("probs, q, msg", [
    ([0.2, 0.1], [0, 1], "strictly increasing"),
    ([0.1, 0.2], [1, 0], "nondecreasing"),
    ([0.0, 0.2], [0, 1], r"\(0, 1\)"),
    ([0.1, 0.2, 0.3], [0, 1], "length"),
])
def test_quantile_reconstruction_errors(probs, q, msg):
    with pytest.raises(ValueError, match=msg):
        quantiles_to_piecewise_cdf(probs, q)


def test_default_tail_rate():
    assert default_tail_rate([2.0, 5.0]) == pytest.approx(0.25)


def test_tied_quantiles_are_nudged_and_invertible():
    f = quantiles_to_piecewise_cdf([0.1, 0.5, 0.9], [0.0, 0.0, 2.0])
    assert np.all(np.diff(f.quantiles) > 0)
    assert f.ppf(0.5) == pytest.approx(0.0, abs=1e-8)


def test_piecewise_tails_are_exponential():
    f = PiecewiseCDF([0.1, 0.9], [0.0, 1.0], 2.0)
    assert f.cdf(-1.0) == pytest.approx(0.1 * np.exp(-2.0))
    assert f.cdf(2.0) == pytest.approx(1.0 - 0.1 * np.exp(-2.0))
    assert f.ppf(f.cdf(-1.0)) == pytest.approx(-1.0)


def test_piecewise_pdf_integrates_to_one():
    f = quantiles_to_piecewise_cdf([0.1, 0.5, 0.9], [0, 1, 3])
    x = np.linspace(-60, 70, 400_001)
    assert np.trapezoid(f.pdf(x), x) == pytest.approx(1.0, abs=1e-3)


def test_empirical_cdf_is_interpolated():
    f = Empirical([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(f.samples, [1.0, 2.0, 3.0])
    assert f.cdf(1.5) == pytest.approx(0.25)


def test_linear_pool_validation():
    with pytest.raises(ValueError):
        LinearPool((), [])
    with pytest.raises(ValueError):
        LinearPool((Gaussian(0, 1),), [0.5, 0.5])
    with pytest.raises(TypeError):
        LinearPool((1.0,), [1.0])


def test_gaussian_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        Gaussian(0, 0)


def test_pool_sample_mean():
    pool = LinearPool((Gaussian(3, 1), Gaussian(6.5, 1)), [0.65, 0.35])
    assert pool.sample(100_000, 3).mean() == pytest.approx(4.225, abs=0.02)


# -- properties ------------------------------------------------------------------


@st.composite
def pools(draw):
    C = draw(st.integers(1, 5))
    mus = draw(st.lists(st.floats(-10, 10), min_size=C, max_size=C))
    sds = draw(st.lists(st.floats(0.05, 5), min_size=C, max_size=C))
    raw = np.array(draw(st.lists(st.floats(0.01, 1), min_size=C, max_size=C)))
    return LinearPool(tuple(Gaussian(m, s) for m, s in zip(mus, sds)), raw / raw.sum())


@given(pools())
@settings(max_examples=60, deadline=None)
def test_pool_cdf_is_a_cdf(pool):
    x = np.linspace(-40, 40, 801)
    F = pool.cdf(x)
    assert np.all(np.diff(F) >= -1e-12)
    assert F.min() >= 0.0 and F.max() <= 1.0 + 1e-12
    assert F[0] < 1e-6 and F[-1] > 1 - 1e-6


@given(pools(), st.floats(-20, 20))
@settings(max_examples=40, deadline=None)
def test_pool_with_all_weight_on_one_component(pool, x):
    j = len(pool) - 1
    w = np.zeros(len(pool))
    w[j] = 1.0
    one = LinearPool(pool.components, w)
    assert one.cdf(x) == pool.components[j].cdf(x)


@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=23, unique=True))
@settings(max_examples=60, deadline=None)
def test_piecewise_round_trip(values):
    q = np.sort(values)
    p = np.linspace(0.02, 0.98, q.size)
    f = quantiles_to_piecewise_cdf(p, q)
    np.testing.assert_allclose(f.ppf(p), q, atol=1e-9)
    np.testing.assert_allclose(f.cdf(q), p, atol=1e-9)


def test_empirical_reconstruction_sup_norm():
    draws = Gaussian(1.0, 2.0).sample(100_000, 7)
    emp = Empirical(draws)
    x = np.linspace(-6, 8, 2001)
    assert np.max(np.abs(emp.cdf(x) - norm.cdf(x, 1.0, 2.0))) < 0.01
