"""Residual empirical distribution functions and goodness-of-fit tests.

Two composite nulls are supported:

* ``uniform_sym`` -- errors uniform on ``[-theta, theta]`` in a mean
  regression model; the regression function is estimated by the envelope
  midrange and ``theta`` by the largest absolute interior residual.
* ``mirrored_exp`` -- one-sided errors with ``F(y) = exp(theta y)``; the
  boundary is estimated by the LP envelope and ``theta`` by minus the
  reciprocal mean interior residual.

Statistics are normalized by the number ``m`` of interior residuals that
enter the empirical distribution function.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, kv

from ._validation import check_bandwidth, check_level, degree_for
from .estimators import (
    _KINDS,
    fit_boundary,
    fit_midrange_mean,
    interior_design_grid,
)
from .exceptions import DomainError, UnsupportedModeError
from .model import MirroredExp, Sample, UniformSym, design_points, replicate_rng, sample_errors

NULL_FAMILIES = ("uniform_sym", "mirrored_exp")
TEST_KINDS = ("ks", "cvm")


@dataclass(frozen=True)
class Residuals:
    values: np.ndarray = field(repr=False)
    interior_mask: np.ndarray = field(repr=False)
    m: int
    variant: str = "boundary"

    @property
    def interior(self):
        return self.values[self.interior_mask]


def _snap(t):
    """Round products like ``n*h`` that are integers up to floating-point error."""
    r = round(t)
    return float(r) if abs(t - r) <= 1e-9 * max(1.0, abs(t)) else t


def _interior_range(n, h, b=None):
    """First and last interior index (1-based, inclusive)."""
    if b is None:
        nh = _snap(n * h)
        return math.floor(nh) + 1, n - math.ceil(nh)
    k = math.ceil(_snap(n * (h + b)))
    return k, n - k


def interior_mask(n, h, b=None):
    """Indicator of interior design points.

    Without ``b``: ``h < i/n <= 1 - h`` (count ``n - floor(nh) - ceil(nh)``).
    With ``b``: ``h + b <= i/n <= 1 - h - b`` (count ``n - 2 ceil(n(h+b)) + 1``).
    """
    lo, hi = _interior_range(n, h, b)
    i = np.arange(1, n + 1)
    return (i >= lo) & (i <= hi)


def interior_count(n, h, b=None):
    lo, hi = _interior_range(n, h, b)
    return max(hi - lo + 1, 0)


def residuals(sample, fit, h, b=None, variant="boundary"):
    """Residuals ``Y_i - fit(i/n)`` with the interior indicator for ``variant``.

    ``fit`` is a ``BoundaryFit``/``SmoothFit`` whose grid contains every
    interior design point.  ``variant`` is ``boundary``, ``mean`` or
    ``smooth`` (the latter requires ``b``).
    """
    ys = sample.ys if isinstance(sample, Sample) else np.asarray(sample, dtype=float)
    n = ys.size
    if variant == "smooth" and b is None:
        raise DomainError("smooth residuals need the smoothing bandwidth b")
    mask = interior_mask(n, h, b if variant == "smooth" else None)
    x = design_points(n)[mask]
    grid = np.asarray(fit.grid, dtype=float)
    pos = np.clip(np.searchsorted(grid, x - 1e-12), 0, grid.size - 1)
    if np.any(np.abs(grid[pos] - x) > 1e-9):
        raise DomainError("fit grid misses interior design points")
    values = np.full(n, np.nan)
    values[mask] = ys[mask] - fit.values[pos]
    return Residuals(values, mask, int(mask.sum()), variant)


def edf(values, mask, m, y):
    """Right-continuous empirical cdf of ``values[mask]`` at ``y``."""
    if m < 1:
        raise DomainError("empirical cdf needs at least one interior value")
    data = np.sort(np.asarray(values, dtype=float)[np.asarray(mask, dtype=bool)])
    out = np.searchsorted(data, np.asarray(y, dtype=float), side="right") / m
    return out if np.ndim(out) else float(out)


def sup_edf_diff(a, b):
    """Exact ``sup_y |F_a(y) - F_b(y)|`` for the empirical cdfs of samples ``a`` and ``b``.

    Evaluated at every jump point and its left limit.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    jumps = np.unique(np.concatenate([a, b]))
    right = np.abs(np.searchsorted(a, jumps, "right") / a.size - np.searchsorted(b, jumps, "right") / b.size)
    left = np.abs(np.searchsorted(a, jumps, "left") / a.size - np.searchsorted(b, jumps, "left") / b.size)
    return float(max(right.max(), left.max()))


def expansion_remainder(deltas, law, y_grid):
    """Average cdf shift ``mean_j [F(y + delta_j) - F(y)]`` for each ``y``.

    ``deltas`` are ``(g_est - g)(j/n)`` over interior design points.
    """
    deltas = np.asarray(deltas, dtype=float)
    y = np.atleast_1d(np.asarray(y_grid, dtype=float))
    shifted = law.cdf(y[:, None] + deltas[None, :])
    return np.mean(shifted, axis=1) - law.cdf(y)


def estimate_theta_uniform(res):
    vals = res.interior if isinstance(res, Residuals) else np.asarray(res, dtype=float)
    if vals.size == 0:
        raise DomainError("no interior residuals")
    return float(np.max(np.abs(vals)))


def estimate_theta_exp(res):
    vals = res.interior if isinstance(res, Residuals) else np.asarray(res, dtype=float)
    if vals.size == 0:
        raise DomainError("no interior residuals")
    mean = float(np.mean(vals))
    if not mean < 0:
        raise DomainError(f"interior mean residual {mean:.3g} is not negative")
    return -1.0 / mean


def _interior_values(res):
    vals = res.interior if isinstance(res, Residuals) else np.asarray(res, dtype=float)
    if vals.size == 0:
        raise DomainError("no interior residuals")
    return vals


def ks_statistic(res, null_cdf):
    """``sqrt(m) * sup_y |F_m(y) - F0(y)|`` from the order statistics."""
    vals = np.sort(_interior_values(res), kind="stable")
    m = vals.size
    u = np.asarray(null_cdf(vals), dtype=float)
    i = np.arange(1, m + 1)
    d = max(np.max(i / m - u), np.max(u - (i - 1) / m))
    return math.sqrt(m) * float(d)


def cvm_statistic(res, null_cdf):
    """``m * int (F_m - F0)^2 dF0`` via probability-integral transforms."""
    vals = np.sort(_interior_values(res), kind="stable")
    m = vals.size
    u = np.asarray(null_cdf(vals), dtype=float)
    i = np.arange(1, m + 1)
    return float(np.sum((u - (2 * i - 1) / (2.0 * m)) ** 2) + 1.0 / (12.0 * m))


# --------------------------------------------------------------------------
# limit distributions


def kolmogorov_cdf(x, tol=1e-12):
    """``P(sup |B(t)| <= x)`` for a Brownian bridge ``B``."""
    x = float(x)
    if x <= 0:
        return 0.0
    if x < 0.6:
        # theta-function form; the alternating series converges slowly here
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * x * x))
            total += term
            if term < tol:
                break
            k += 1
        return min(1.0, math.sqrt(2 * math.pi) / x * total)
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return max(0.0, min(1.0, 1.0 - 2.0 * total))


def cvm_limit_cdf(x, tol=1e-14):
    """Cdf of the Cramer-von Mises limit ``int_0^1 B(t)^2 dt`` (Bessel-K series)."""
    x = float(x)
    if x <= 0:
        return 0.0
    total = 0.0
    for k in range(200):
        z = (4 * k + 1) ** 2 / (16.0 * x)
        if z > 700:
            break
        log_coef = gammaln(k + 0.5) - gammaln(0.5) - gammaln(k + 1)
        term = math.exp(log_coef - z) * math.sqrt(4 * k + 1) * kv(0.25, z)
        total += term
        if term < tol:
            break
    return max(0.0, min(1.0, total / (math.pi * math.sqrt(x))))


def _invert(cdf, p, lo, hi, tol=1e-10):
    while cdf(hi) < p:
        hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kolmogorov_quantile(p):
    return _invert(kolmogorov_cdf, p, 0.0, 3.0)


def cvm_limit_quantile(p):
    return _invert(cvm_limit_cdf, p, 0.0, 1.0)


# --------------------------------------------------------------------------
# test pipeline


def null_law(family, theta):
    if family == "uniform_sym":
        return UniformSym(theta)
    if family == "mirrored_exp":
        return MirroredExp(theta)
    raise DomainError(f"null family must be one of {NULL_FAMILIES}, got {family!r}")


def _statistic(test_kind, res, cdf):
    if test_kind == "ks":
        return ks_statistic(res, cdf)
    if test_kind == "cvm":
        return cvm_statistic(res, cdf)
    raise DomainError(f"test_kind must be one of {TEST_KINDS}, got {test_kind!r}")


def _fit_pipeline(ys, family, beta, h, test_kind, objective_kind="integral"):
    n = ys.size
    grid = interior_design_grid(n, h, 1 - h)
    if family == "uniform_sym":
        fit = fit_midrange_mean(ys, h, grid, beta, objective_kind)
        res = residuals(ys, fit, h, variant="mean")
        theta = estimate_theta_uniform(res)
    elif family == "mirrored_exp":
        fit = fit_boundary(ys, h, beta, grid, objective_kind)
        res = residuals(ys, fit, h, variant="boundary")
        theta = estimate_theta_exp(res)
    else:
        raise DomainError(f"null family must be one of {NULL_FAMILIES}, got {family!r}")
    if not theta > 1e-12 * max(1.0, float(np.max(np.abs(ys)))):
        raise DomainError("estimated null parameter is 0: residuals are degenerate")
    return theta, _statistic(test_kind, res, null_law(family, theta).cdf), res.m, fit


def pipeline_statistic(ys, family, beta, h, test_kind, objective_kind="integral"):
    """Fit, residuals, parameter estimate and statistic for one data set.

    Returns ``(theta_hat, statistic, m)``.
    """
    return _fit_pipeline(np.asarray(ys, dtype=float), family, beta, h, test_kind, objective_kind)[:3]


def extend_fit(fit, n):
    """Fitted function at every design point ``i/n``.

    Inside the fit grid the values are interpolated linearly.  On the two
    boundary strips the fit is continued by the least-squares line through
    its first (last) ``max(2, n h)`` grid values.
    """
    x = design_points(n)
    grid, values = np.asarray(fit.grid, dtype=float), np.asarray(fit.values, dtype=float)
    out = np.interp(x, grid, values)
    k = min(grid.size, max(2, int(round(n * fit.h))))
    if grid.size >= 2:
        left = x < grid[0]
        right = x > grid[-1]
        sl = np.polyfit(grid[:k], values[:k], 1)[0]
        sr = np.polyfit(grid[-k:], values[-k:], 1)[0]
        out[left] = values[0] + sl * (x[left] - grid[0])
        out[right] = values[-1] + sr * (x[right] - grid[-1])
    return out


@dataclass(frozen=True)
class NullSpec:
    """What to simulate when calibrating a test.

    With ``estimated=True`` each replicate runs the whole pipeline on
    ``truth + eps``.  ``truth`` is a function on [0, 1], an array of values
    at the design points, or None for the zero function.  Otherwise the
    statistic is computed from the ``n`` raw errors against the fully
    specified null law.
    """

    family: str
    n: int
    theta: float = 1.0
    h: float = None
    beta: float = 2.0
    estimated: bool = True
    truth: object = None
    objective_kind: str = "integral"


@dataclass(frozen=True)
class CriticalValue:
    value: float
    level: float
    source: str
    null_statistics: np.ndarray = field(default=None, repr=False)

    def p_value(self, statistic, test_kind):
        if self.null_statistics is not None:
            exceed = np.count_nonzero(self.null_statistics >= statistic)
            return (1.0 + exceed) / (self.null_statistics.size + 1.0)
        if test_kind == "ks":
            return 1.0 - kolmogorov_cdf(statistic)
        return 1.0 - cvm_limit_cdf(statistic)


def simulate_null_statistics(test_kind, spec, R, seed=0, stream=(), indices=None):
    """Statistic values over ``R`` replicates generated under ``spec``.

    Replicate ``r`` draws from ``replicate_rng(seed, r, *stream)``; pass
    ``indices`` to compute a subset of the replicates ``0..R-1``.
    """
    law = null_law(spec.family, spec.theta)
    n = int(spec.n)
    x = design_points(n)
    if spec.truth is None:
        g = np.zeros(n)
    elif callable(spec.truth):
        g = np.asarray(spec.truth(x), dtype=float)
    else:
        g = np.asarray(spec.truth, dtype=float)
        if g.shape != (n,):
            raise DomainError(f"truth array has shape {g.shape}, expected ({n},)")
    indices = np.arange(int(R)) if indices is None else np.asarray(indices, dtype=np.int64)
    out = np.empty(indices.size)
    for j, r in enumerate(indices):
        eps = sample_errors(law, n, replicate_rng(seed, r, *stream))
        if spec.estimated:
            out[j] = pipeline_statistic(g + eps, spec.family, spec.beta, spec.h, test_kind, spec.objective_kind)[1]
        else:
            out[j] = _statistic(test_kind, eps, law.cdf)
    return out


def _empirical_upper_quantile(stats, level):
    s = np.sort(stats)
    k = min(max(math.ceil((1.0 - level) * (s.size + 1)) - 1, 0), s.size - 1)
    return float(s[k])


def critical_value_from_statistics(stats, level):
    """Empirical upper ``level`` quantile of simulated null statistics."""
    stats = np.sort(np.asarray(stats, dtype=float))
    if stats.size == 0:
        raise DomainError("no simulated statistics")
    return CriticalValue(_empirical_upper_quantile(stats, level), level, f"monte_carlo:{stats.size}", stats)


def critical_value(test_kind, null_spec, level, mode="asymptotic", R=2000, seed=0, stream=()):
    """Critical value of the KS or CvM test at ``level``.

    ``mode="asymptotic"`` inverts the Kolmogorov law for KS and the
    Cramer-von Mises limit for CvM.  The Kolmogorov law is the limit of the
    uniform test with estimated half-width, because that estimate converges
    faster than ``n**-1/2``.  With an estimated parameter the CvM limit
    depends on the family and the mirrored exponential KS limit changes as
    well; those cases need ``mode="monte_carlo"``, a parametric bootstrap of
    the whole pipeline.
    """
    level = check_level(level)
    if test_kind not in TEST_KINDS:
        raise DomainError(f"test_kind must be one of {TEST_KINDS}, got {test_kind!r}")
    if mode == "asymptotic":
        if null_spec.estimated and (test_kind == "cvm" or null_spec.family == "mirrored_exp"):
            raise UnsupportedModeError(
                f"no asymptotic critical value for {test_kind} with estimated {null_spec.family} parameter; "
                "use mode='monte_carlo'"
            )
        if test_kind == "ks":
            return CriticalValue(kolmogorov_quantile(1 - level), level, "asymptotic:kolmogorov")
        return CriticalValue(cvm_limit_quantile(1 - level), level, "asymptotic:cvm")
    if mode == "monte_carlo":
        if null_spec.estimated and null_spec.h is None:
            raise DomainError("monte-carlo calibration of the full pipeline needs a bandwidth")
        stats = simulate_null_statistics(test_kind, null_spec, R, seed, stream)
        return critical_value_from_statistics(stats, level)
    raise DomainError(f"unknown critical-value mode {mode!r}")


@dataclass(frozen=True)
class GofResult:
    theta_hat: float
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    m: int
    n: int
    h: float
    degree: int
    test_kind: str
    null_family: str
    cv_source: str
    normalization: str = "sqrt(m_n)"

    def summary(self):
        verdict = "reject" if self.reject else "do not reject"
        return (
            f"{self.test_kind.upper()} test of H0: {self.null_family} "
            f"(theta_hat={self.theta_hat:.6g}, n={self.n}, m={self.m}, h={self.h:.4g}, degree={self.degree})\n"
            f"statistic={self.statistic:.6g} critical={self.critical_value:.6g} "
            f"p={self.p_value:.4g} [{self.cv_source}] -> {verdict}"
        )


def parse_cv_mode(cv_mode):
    """``"asymptotic"`` or ``"mc:R"`` -> ``(mode, R)``."""
    if cv_mode == "asymptotic":
        return "asymptotic", None
    if isinstance(cv_mode, str) and cv_mode.startswith("mc:"):
        try:
            R = int(cv_mode[3:])
        except ValueError:
            raise DomainError(f"bad replicate count in {cv_mode!r}") from None
        if R < 1:
            raise DomainError("mc replicate count must be >= 1")
        return "monte_carlo", R
    raise DomainError(f"cv mode must be 'asymptotic' or 'mc:R', got {cv_mode!r}")


def bootstrap_spec(ys, fit, theta, family, beta, h, objective_kind="integral", truth="fitted"):
    """Null model for the parametric bootstrap of one data set.

    ``truth="fitted"`` simulates around the fitted function (extended to
    the boundary strips) with the fitted ``theta``.  ``truth="zero"`` uses
    the zero function and ``theta = 1``; the statistic is scale invariant
    there, so this is the fitted null up to the regression function.
    """
    n = np.asarray(ys).size
    if truth == "fitted":
        return NullSpec(family, n, float(theta), h, beta, True, extend_fit(fit, n), objective_kind)
    if truth == "zero":
        return NullSpec(family, n, 1.0, h, beta, True, None, objective_kind)
    raise DomainError(f"bootstrap truth must be 'fitted' or 'zero', got {truth!r}")


def gof_test(sample, null_family, beta, h, level=0.05, test_kind="cvm", cv_mode="mc:500",
             seed=0, objective_kind="integral", bootstrap="fitted", stream=()):
    """Goodness-of-fit test of a parametric error family.

    ``cv_mode`` is ``"asymptotic"``, ``"mc:R"`` or a precomputed
    ``CriticalValue``.  ``mc:R`` is a parametric bootstrap: ``R`` data sets
    are drawn from the fitted null model (see :func:`bootstrap_spec` for
    the ``bootstrap`` choices) and sent through the whole pipeline.
    """
    ys = sample.ys if isinstance(sample, Sample) else np.asarray(sample, dtype=float)
    h = check_bandwidth(h)
    level = check_level(level)
    if objective_kind not in _KINDS:
        raise DomainError(f"objective_kind must be one of {sorted(_KINDS)}")
    theta, stat, m, fit = _fit_pipeline(ys, null_family, beta, h, test_kind, objective_kind)
    if isinstance(cv_mode, CriticalValue):
        cv = cv_mode
    else:
        mode, R = parse_cv_mode(cv_mode)
        if mode == "asymptotic":
            spec = NullSpec(null_family, ys.size, 1.0, h, beta, True, None, objective_kind)
        else:
            spec = bootstrap_spec(ys, fit, theta, null_family, beta, h, objective_kind, bootstrap)
        cv = critical_value(test_kind, spec, level, mode, R or 0, seed, stream)
    p = cv.p_value(stat, test_kind)
    return GofResult(theta, stat, cv.value, float(min(max(p, 0.0), 1.0)), bool(stat > cv.value), m, ys.size,
                     h, degree_for(beta), test_kind, null_family, cv.source)


@dataclass(frozen=True)
class ApplicabilityReport:
    """Which asymptotic results cover a given ``(alpha, beta)``.

    ``residual_edf_equivalence``: ``1/beta < alpha < 2 - 1/beta``.
    ``remainder_bandwidths_exist``: ``alpha < 3 - 3/(2 beta)``.
    ``expansion_whole_line``: the smoothed-residual expansion holds on all of
    the real line, i.e. some ``delta`` in ``(max(0, 1/alpha - 1), min(1, beta - 1))``.
    """

    alpha: float
    beta: float
    residual_edf_equivalence: bool
    remainder_bandwidths_exist: bool
    expansion_whole_line: bool

    def labels(self):
        out = []
        if not self.residual_edf_equivalence:
            out.append("outside residual-EDF equivalence region")
        if not self.remainder_bandwidths_exist:
            out.append("outside remainder-negligibility region")
        if not self.expansion_whole_line:
            out.append("expansion not valid on the whole line")
        return out


def applicability_report(alpha, beta):
    alpha, beta = float(alpha), float(beta)
    if not (alpha > 0 and beta > 0):
        raise DomainError("alpha and beta must be positive")
    equivalence = 1.0 / beta < alpha < 2.0 - 1.0 / beta
    remainder = alpha < 3.0 - 3.0 / (2.0 * beta)
    if beta <= 1:
        whole_line = False
    else:
        whole_line = max(0.0, 1.0 / alpha - 1.0) < min(1.0, beta - 1.0)
    return ApplicabilityReport(alpha, beta, equivalence, remainder, whole_line)
