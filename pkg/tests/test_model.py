import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frontier_lab.exceptions import DomainError
from frontier_lab.model import (
    MirroredExp,
    PointMass,
    PolyBump,
    PowerTail,
    RegressionTruth,
    Sample,
    UniformSym,
    alpha_of,
    cdf,
    design_points,
    generate_sample,
    make_law,
    make_truth,
    quantile,
    replicate_rng,
    sample_errors,
    sine_linear,
)

LAWS = [PowerTail(1.0), PowerTail(2.0), PowerTail(0.5), MirroredExp(2.0), UniformSym(1.5),
        PolyBump(0.0), PolyBump(1.5), PolyBump(-0.5)]


def test_cdf_examples():
    assert cdf(PowerTail(1.0), -0.25) == pytest.approx(0.75, abs=1e-15)
    assert cdf(MirroredExp(2.0), 0.0) == 1.0
    assert cdf(MirroredExp(2.0), -0.5) == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_cdf_clamped_outside_support():
    law = PowerTail(1.0)
    assert cdf(law, 0.3) == 1.0
    assert cdf(law, -1.7) == 0.0
    assert cdf(UniformSym(1.0), 2.0) == 1.0
    assert cdf(UniformSym(1.0), -2.0) == 0.0


def test_quantile_examples():
    assert quantile(PowerTail(1.0), 0.5) == pytest.approx(-0.5, abs=1e-15)
    assert quantile(PowerTail(2.0), 0.75) == pytest.approx(-0.5, abs=1e-15)
    assert quantile(UniformSym(1.0), 0.25) == pytest.approx(-0.5, abs=1e-15)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.2, float("nan")])
def test_quantile_domain(u):
    with pytest.raises(DomainError):
        quantile(PowerTail(1.0), u)


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_cdf_quantile_roundtrip(law):
    u = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(law.cdf(law.quantile(u)), u, atol=1e-9)


def test_bisection_fallback_matches_closed_form():
    from frontier_lab.model import _bisect_quantile

    law = PolyBump(1.5)
    u = np.linspace(0.01, 0.99, 25)
    np.testing.assert_allclose(_bisect_quantile(law, u), law.quantile(u), atol=1e-11)


@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_cdf_monotone_and_endpoints(law):
    lo, hi = law.support
    ys = np.linspace(max(lo, -20.0) - 0.5, hi + 0.5, 2001)
    F = law.cdf(ys)
    assert np.all(np.diff(F) >= 0)
    assert law.cdf(hi) == 1.0
    if math.isfinite(lo):
        assert law.cdf(lo) == pytest.approx(0.0, abs=1e-15)


def test_power_tail_exact_form():
    t = np.linspace(0.01, 1.0, 50)
    for a in (0.4, 1.0, 2.7):
        np.testing.assert_allclose(1.0 - PowerTail(a).cdf(-t), t**a, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("zeta", [-0.5, 0.0, 1.0, 1.5, 3.0])
def test_polybump_density_normalized(zeta):
    from scipy.integrate import quad

    law = PolyBump(zeta)
    total = quad(lambda y: float(law.density(y)), -1, 0)[0] + quad(lambda y: float(law.density(y)), 0, 1)[0]
    assert total == pytest.approx(1.0, abs=1e-8)
    # cdf is the integral of the density
    assert law.cdf(-0.3) == pytest.approx(quad(lambda y: float(law.density(y)), -1, -0.3)[0], abs=1e-8)


def test_alpha_of():
    assert alpha_of(MirroredExp(5.0)) == 1.0
    assert alpha_of(PowerTail(0.5)) == 0.5
    assert alpha_of(PolyBump(1.0)) == 2.0
    assert alpha_of(UniformSym(3.0)) == 1.0


def test_invalid_parameters():
    for bad in (lambda: PowerTail(0.0), lambda: MirroredExp(-1.0), lambda: UniformSym(0.0),
                lambda: PolyBump(-1.0), lambda: make_law("cauchy")):
        with pytest.raises(DomainError):
            bad()


def test_make_law_names():
    assert make_law("powertail", alpha=2) == PowerTail(2.0)
    assert make_law("mexp", theta=3) == MirroredExp(3.0)
    assert make_law("uniform") == UniformSym(1.0)
    assert make_law("polybump", zeta=1.5) == PolyBump(1.5)
    assert isinstance(make_law("zero"), PointMass)


def test_sample_support_and_determinism():
    x = sample_errors(UniformSym(1.0), 10_000, seed=3)
    assert np.all(np.abs(x) <= 1.0)
    np.testing.assert_array_equal(x, sample_errors(UniformSym(1.0), 10_000, seed=3))
    assert not np.array_equal(x, sample_errors(UniformSym(1.0), 10_000, seed=4))
    assert np.all(sample_errors(MirroredExp(1.0), 1000, 0) <= 0)


def test_power_tail_mean_abs():
    x = sample_errors(PowerTail(1.0), 100_000, seed=11)
    se = math.sqrt(1.0 / 12.0 / x.size)  # |eps| is uniform on [0, 1]
    assert abs(np.mean(np.abs(x)) - 0.5) < 3 * se


@pytest.mark.parametrize("law", [PowerTail(1.0), PowerTail(2.0), MirroredExp(1.0), PolyBump(1.5)], ids=repr)
def test_dkw_band(law):
    n = 100_000
    x = np.sort(sample_errors(law, n, seed=5))
    eps = math.sqrt(math.log(2 / 0.01) / (2 * n))
    i = np.arange(1, n + 1)
    F = law.cdf(x)
    assert max(np.max(i / n - F), np.max(F - (i - 1) / n)) < max(eps, 0.01)


def test_replicate_streams_independent_of_order():
    a = [replicate_rng(7, r).random(3) for r in range(5)]
    b = [replicate_rng(7, r).random(3) for r in reversed(range(5))][::-1]
    np.testing.assert_array_equal(np.array(a), np.array(b))
    assert not np.array_equal(replicate_rng(7, 0, 1).random(3), replicate_rng(7, 0, 2).random(3))


def test_generate_sample():
    s = generate_sample(make_truth("zero"), PowerTail(1.0), 500, seed=1)
    assert s.n == 500 and np.all(s.ys <= 0)
    s = generate_sample(RegressionTruth(sine_linear), UniformSym(1.0), 300, seed=2)
    g = sine_linear(s.design)
    assert np.all(np.abs(s.ys - g) <= 1.0)
    s = generate_sample(RegressionTruth(lambda x: np.ones_like(x)), PointMass(), 2, seed=0)
    np.testing.assert_array_equal(s.ys, [1.0, 1.0])


def test_zero_noise_limit_of_power_tail_quantile():
    assert PowerTail(1.0).quantile(1 - 1e-13) == pytest.approx(0.0, abs=1e-12)


def test_sample_is_immutable_and_validated():
    s = Sample([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        s.ys[0] = 5.0
    with pytest.raises(DomainError):
        Sample([1.0])
    with pytest.raises(DomainError):
        generate_sample(make_truth("zero"), PowerTail(1.0), 1)
    np.testing.assert_allclose(design_points(4), [0.25, 0.5, 0.75, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(1e-6, 1 - 1e-6))
def test_power_tail_quantile_property(alpha, u):
    law = PowerTail(alpha)
    assert law.cdf(law.quantile(u)) == pytest.approx(u, abs=1e-9)
