import math

import numpy as np
import pytest
from scipy import stats

from frontier_lab.estimators import fit_boundary, fit_midrange_mean, interior_design_grid, smooth_boundary
from frontier_lab.exceptions import DomainError, UnsupportedModeError
from frontier_lab.gof import (
    CriticalValue,
    NullSpec,
    applicability_report,
    critical_value,
    critical_value_from_statistics,
    cvm_limit_cdf,
    cvm_limit_quantile,
    cvm_statistic,
    edf,
    estimate_theta_exp,
    estimate_theta_uniform,
    expansion_remainder,
    gof_test,
    interior_count,
    interior_mask,
    kolmogorov_cdf,
    kolmogorov_quantile,
    ks_statistic,
    parse_cv_mode,
    residuals,
    simulate_null_statistics,
    sup_edf_diff,
)
from frontier_lab.model import MirroredExp, PowerTail, UniformSym, design_points, generate_sample, make_truth, sample_errors


def _uniform01(v):
    return np.clip(np.asarray(v, dtype=float), 0.0, 1.0)


def test_interior_count_example():
    assert interior_count(10, 0.25) == 5
    assert np.count_nonzero(interior_mask(10, 0.25)) == 5


@pytest.mark.parametrize("n", [10, 37, 100, 501, 1000])
@pytest.mark.parametrize("h", [0.05, 0.1, 0.137, 0.25])
def test_interior_counts_match_closed_forms(n, h):
    assert np.count_nonzero(interior_mask(n, h)) == interior_count(n, h)
    b = 0.08
    assert np.count_nonzero(interior_mask(n, h, b)) == interior_count(n, h, b)


def test_residuals_boundary_variant():
    s = generate_sample(make_truth("linear"), PowerTail(1.0), 400, seed=1)
    h = 0.1
    fit = fit_boundary(s, h, 2.0, interior_design_grid(400, h, 1 - h))
    res = residuals(s, fit, h)
    assert res.m == interior_count(400, h)
    assert np.all(res.interior <= 1e-9)
    assert np.all(np.isnan(res.values[~res.interior_mask]))


def test_residuals_zero_noise():
    n, h = 200, 0.1
    ys = 4 * design_points(n)
    fit = fit_boundary(ys, h, 2.0, interior_design_grid(n, h, 1 - h))
    np.testing.assert_allclose(residuals(ys, fit, h).interior, 0.0, atol=1e-12)


def test_residuals_errors():
    ys = np.zeros(100)
    fit = fit_boundary(ys, 0.1, 2.0, [0.5])
    with pytest.raises(DomainError):
        residuals(ys, fit, 0.1)
    fit = fit_boundary(ys, 0.1, 2.0, interior_design_grid(100, 0.1, 0.9))
    with pytest.raises(DomainError):
        residuals(ys, fit, 0.1, variant="smooth")


def test_residuals_smooth_variant():
    n, h, b = 500, 0.1, 0.05
    ys = 4 * design_points(n)
    bfit = fit_boundary(ys, h, 2.0, interior_design_grid(n, h, 1 - h))
    sfit = smooth_boundary(bfit, b, grid=interior_design_grid(n, h + b, 1 - h - b))
    res = residuals(ys, sfit, h, b, variant="smooth")
    assert res.m == interior_count(n, h, b)
    np.testing.assert_allclose(res.interior, 0.0, atol=1e-9)


def test_edf_examples():
    v = np.array([-3.0, -1.0, -2.0])
    mask = np.ones(3, bool)
    assert edf(v, mask, 3, -1.5) == pytest.approx(2 / 3)
    assert edf(v, mask, 3, -10) == 0.0
    assert edf(v, mask, 3, -1.0) == 1.0
    assert edf(np.array([1.0, 1.0, 2.0]), mask, 3, 1.0) == pytest.approx(2 / 3)
    with pytest.raises(DomainError):
        edf(v, np.zeros(3, bool), 0, 0.0)


def test_sup_edf_diff_examples():
    a = np.array([0.3, -1.0, 2.0])
    assert sup_edf_diff(a, a) == 0.0
    assert sup_edf_diff([-1.0], [-2.0]) == 1.0


def test_sup_edf_diff_dense_grid_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = np.round(rng.normal(size=rng.integers(1, 30)), 1)
        b = np.round(rng.normal(size=rng.integers(1, 30)), 1)
        grid = np.arange(-6, 6, 0.05) + 0.025  # midpoints between the rounded values
        grid = np.concatenate([grid, np.round(np.arange(-6, 6, 0.1), 1)])
        Fa = np.mean(a[None, :] <= grid[:, None], axis=1)
        Fb = np.mean(b[None, :] <= grid[:, None], axis=1)
        assert sup_edf_diff(a, b) == pytest.approx(np.max(np.abs(Fa - Fb)), abs=1e-12)


def test_expansion_remainder_examples():
    y = np.array([-0.7, -0.5, -0.2])
    np.testing.assert_array_equal(expansion_remainder(np.zeros(5), PowerTail(1.0), y), 0.0)
    # PowerTail(1) is uniform on [-1, 0]
    np.testing.assert_allclose(expansion_remainder(np.full(5, 0.01), PowerTail(1.0), y), 0.01, atol=1e-12)


def test_theta_estimators():
    assert estimate_theta_uniform(np.array([-0.2, 0.3, -0.5])) == 0.5
    assert estimate_theta_uniform(np.zeros(3)) == 0.0
    assert estimate_theta_exp(np.array([-0.5, -0.5])) == 2.0
    assert estimate_theta_exp(np.array([-1.0])) == 1.0
    with pytest.raises(DomainError):
        estimate_theta_exp(np.array([0.0, 0.0]))
    with pytest.raises(DomainError):
        estimate_theta_uniform(np.array([]))


def test_theta_exp_consistency():
    eps = sample_errors(MirroredExp(2.0), 100_000, 0)
    # delta method: sd of -1/mean is theta / sqrt(n)
    assert abs(estimate_theta_exp(eps) - 2.0) < 3 * 2.0 / math.sqrt(eps.size)


def test_theta_uniform_scale_equivariance():
    v = np.array([-0.2, 0.3, -0.5, 0.1])
    assert estimate_theta_uniform(3.5 * v) == pytest.approx(3.5 * estimate_theta_uniform(v))
    a = ks_statistic(v, UniformSym(0.5).cdf)
    b = ks_statistic(3.5 * v, UniformSym(1.75).cdf)
    assert a == pytest.approx(b, abs=1e-14)


def test_ks_examples():
    m = 4
    v = (2 * np.arange(1, m + 1) - 1) / (2 * m)
    assert ks_statistic(v, _uniform01) == pytest.approx(0.25, abs=1e-15)
    assert ks_statistic(np.array([0.5]), _uniform01) == 0.5


def test_ks_matches_scipy():
    rng = np.random.default_rng(1)
    for m in (1, 5, 50, 400):
        v = rng.uniform(size=m)
        ref = stats.kstest(v, "uniform").statistic
        assert ks_statistic(v, _uniform01) == pytest.approx(math.sqrt(m) * ref, abs=1e-12)


def test_ks_is_exact_sup():
    """The order-statistic formula equals a dense evaluation of the sup."""
    v = np.sort(np.random.default_rng(4).uniform(size=12))
    grid = np.sort(np.concatenate([np.linspace(0, 1, 20001), v, v - 1e-13]))
    Fm = np.searchsorted(v, grid, side="right") / v.size
    assert ks_statistic(v, _uniform01) == pytest.approx(math.sqrt(12) * np.max(np.abs(Fm - grid)), abs=1e-12)


def test_cvm_examples():
    m = 5
    v = (2 * np.arange(1, m + 1) - 1) / (2 * m)
    assert cvm_statistic(v, _uniform01) == pytest.approx(1 / 60, abs=1e-15)
    assert cvm_statistic(np.array([0.5]), _uniform01) == pytest.approx(1 / 12, abs=1e-15)
    assert cvm_statistic(np.array([1.0, 1.0]), _uniform01) == pytest.approx(0.75**2 + 0.25**2 + 1 / 24, abs=1e-15)


def test_cvm_matches_scipy():
    v = np.random.default_rng(2).uniform(size=30)
    assert cvm_statistic(v, _uniform01) == pytest.approx(stats.cramervonmises(v, "uniform").statistic, abs=1e-12)


def test_cvm_against_riemann_sum():
    rng = np.random.default_rng(3)
    N = 1_000_000
    u = (np.arange(N) + 0.5) / N
    for m in (3, 10, 40):
        v = np.sort(rng.uniform(size=m))
        Fm = np.searchsorted(v, u, side="right") / m
        ref = m * np.mean((Fm - u) ** 2)
        assert cvm_statistic(v, _uniform01) == pytest.approx(ref, abs=1e-6)


def test_kolmogorov_cdf():
    assert kolmogorov_cdf(0.0) == 0.0
    assert kolmogorov_cdf(50.0) == 1.0
    assert 0.9499 <= kolmogorov_cdf(1.3581) <= 0.9501
    x = np.linspace(0.05, 3, 200)
    F = np.array([kolmogorov_cdf(t) for t in x])
    assert np.all(np.diff(F) >= 0)
    np.testing.assert_allclose(F, stats.kstwobign.cdf(x), atol=1e-10)


def test_kolmogorov_quantiles():
    assert kolmogorov_quantile(0.95) == pytest.approx(1.3581, abs=1e-4)
    assert kolmogorov_quantile(0.5) == pytest.approx(0.8276, abs=1e-4)
    cv = critical_value("ks", NullSpec("uniform_sym", 100, h=0.1), 0.05)
    assert cv.value == pytest.approx(1.3581, abs=1e-4)


def test_cvm_limit():
    # classical table of the omega-squared limit
    assert cvm_limit_quantile(0.90) == pytest.approx(0.34730, abs=1e-4)
    assert cvm_limit_quantile(0.95) == pytest.approx(0.46136, abs=1e-4)
    assert cvm_limit_quantile(0.99) == pytest.approx(0.74346, abs=1e-4)
    assert cvm_limit_cdf(0.0) == 0.0
    x = np.linspace(0.01, 2, 100)
    assert np.all(np.diff([cvm_limit_cdf(t) for t in x]) >= 0)


def test_cvm_monte_carlo_against_limit():
    spec = NullSpec("uniform_sym", 200, 1.0, estimated=False)
    cv = critical_value("cvm", spec, 0.05, "monte_carlo", R=2000, seed=0)
    assert abs(cv.value - cvm_limit_quantile(0.95)) < 0.01


def test_unsupported_asymptotic_modes():
    with pytest.raises(UnsupportedModeError):
        critical_value("cvm", NullSpec("uniform_sym", 100, h=0.1), 0.05)
    with pytest.raises(UnsupportedModeError):
        critical_value("ks", NullSpec("mirrored_exp", 100, h=0.1), 0.05)
    assert critical_value("cvm", NullSpec("mirrored_exp", 100, estimated=False), 0.05).source == "asymptotic:cvm"


def test_parse_cv_mode():
    assert parse_cv_mode("asymptotic") == ("asymptotic", None)
    assert parse_cv_mode("mc:250") == ("monte_carlo", 250)
    for bad in ("mc:x", "mc:0", "bootstrap"):
        with pytest.raises(DomainError):
            parse_cv_mode(bad)


def test_empirical_critical_value_and_p_value():
    cv = critical_value_from_statistics(np.arange(1.0, 100.0), 0.05)
    assert cv.value == 95.0
    assert cv.p_value(200.0, "cvm") == pytest.approx(1 / 100)
    assert cv.p_value(0.0, "cvm") == 1.0
    assert CriticalValue(1.3581, 0.05, "asymptotic").p_value(1.3581, "ks") == pytest.approx(0.05, abs=1e-4)


def test_fully_specified_p_values_are_uniform():
    spec = NullSpec("mirrored_exp", 100, 2.0, estimated=False)
    law = MirroredExp(2.0)
    cv = CriticalValue(0.0, 0.05, "asymptotic")
    ps = []
    from frontier_lab.model import replicate_rng

    for r in range(2000):
        eps = sample_errors(law, spec.n, replicate_rng(5, r))
        ps.append(cv.p_value(ks_statistic(eps, law.cdf), "ks"))
    ps = np.sort(ps)
    i = np.arange(1, ps.size + 1)
    D = max(np.max(i / ps.size - ps), np.max(ps - (i - 1) / ps.size))
    assert D < 0.05


def test_simulated_statistics_reproducible():
    spec = NullSpec("mirrored_exp", 100, 1.0, h=0.2, beta=2.0)
    a = simulate_null_statistics("cvm", spec, 6, seed=3)
    b = np.concatenate([simulate_null_statistics("cvm", spec, 6, seed=3, indices=[0, 1, 2]),
                        simulate_null_statistics("cvm", spec, 6, seed=3, indices=[3, 4, 5])])
    np.testing.assert_array_equal(a, b)


def test_statistic_scale_invariance_under_pipeline():
    """The mexp pipeline statistic does not depend on theta when g is zero."""
    from frontier_lab.gof import pipeline_statistic

    eps = sample_errors(MirroredExp(1.0), 300, 4)
    a = pipeline_statistic(eps, "mirrored_exp", 2.0, 0.15, "cvm")
    b = pipeline_statistic(eps / 3.0, "mirrored_exp", 2.0, 0.15, "cvm")
    assert b[0] == pytest.approx(3 * a[0], rel=1e-9)
    assert b[1] == pytest.approx(a[1], abs=1e-9)


def test_gof_test_result():
    s = generate_sample(make_truth("sine_linear"), UniformSym(1.0), 200, seed=0)
    h = 0.6 * 200 ** (-1 / 3)
    r = gof_test(s, "uniform_sym", 1.0, h, test_kind="ks", cv_mode="asymptotic")
    assert r.reject == (r.statistic > r.critical_value)
    assert 0 <= r.p_value <= 1
    assert r.m == interior_count(200, h) and r.normalization == "sqrt(m_n)"
    assert "KS test" in r.summary()
    r2 = gof_test(s, "mirrored_exp", 2.0, h, cv_mode="mc:50")
    assert r2.cv_source == "monte_carlo:50"
    assert r2 == gof_test(s, "mirrored_exp", 2.0, h, cv_mode="mc:50")


def test_extend_fit_reproduces_lines():
    from frontier_lab.gof import extend_fit

    n, h = 200, 0.1
    ys = 1 + 3 * design_points(n)
    fit = fit_midrange_mean(ys, h, interior_design_grid(n, h, 1 - h), 2.0)
    np.testing.assert_allclose(extend_fit(fit, n), ys, atol=1e-9)


def test_bootstrap_choices():
    from frontier_lab.gof import bootstrap_spec

    s = generate_sample(make_truth("sine_linear"), UniformSym(1.0), 150, seed=3)
    a = gof_test(s, "uniform_sym", 2.0, 0.15, cv_mode="mc:40", bootstrap="fitted")
    b = gof_test(s, "uniform_sym", 2.0, 0.15, cv_mode="mc:40", bootstrap="zero")
    assert a.statistic == b.statistic and a.critical_value != b.critical_value
    fit = fit_midrange_mean(s.ys, 0.15, interior_design_grid(150, 0.15, 0.85), 2.0)
    with pytest.raises(DomainError):
        bootstrap_spec(s.ys, fit, 1.0, "uniform_sym", 2.0, 0.15, truth="oracle")


def test_gof_detects_wrong_family():
    s = generate_sample(make_truth("linear"), PowerTail(1.0), 500, seed=0)
    r = gof_test(s, "mirrored_exp", 2.0, 0.15, cv_mode="mc:100")
    assert r.reject


def test_gof_zero_noise_is_a_domain_error():
    ys = 4 * design_points(100)
    with pytest.raises(DomainError):
        gof_test(ys, "uniform_sym", 2.0, 0.2, test_kind="ks", cv_mode="asymptotic")
    with pytest.raises(DomainError):
        gof_test(ys, "mirrored_exp", 2.0, 0.2, cv_mode="mc:10")


def test_uniform_midrange_theta_close():
    ys = sample_errors(UniformSym(1.0), 2000, 0)
    h = 0.1
    fit = fit_midrange_mean(ys, h, interior_design_grid(2000, h, 1 - h))
    assert abs(estimate_theta_uniform(residuals(ys, fit, h, variant="mean")) - 1.0) < 0.02


def test_applicability_examples():
    assert applicability_report(1, 2).residual_edf_equivalence
    assert not applicability_report(0.4, 2).residual_edf_equivalence
    assert applicability_report(1.9, 1.6).remainder_bandwidths_exist
    assert not applicability_report(2.5, 2).remainder_bandwidths_exist
    assert applicability_report(1, 2).expansion_whole_line
    assert not applicability_report(0.4, 2).expansion_whole_line
    assert "outside residual-EDF equivalence region" in applicability_report(0.4, 2).labels()
    assert applicability_report(1, 2).labels() == []
