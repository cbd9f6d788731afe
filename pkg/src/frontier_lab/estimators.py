"""Boundary and mean regression estimators for the fixed equidistant design.

Functional entry points (``fit_boundary``, ``smooth_boundary``, ...) return
immutable fit records.  The scikit-learn style classes at the bottom wrap
them with ``fit``/``predict``/``get_params`` so they compose with pipelines
and model-selection tools.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import polyopt
from ._validation import (
    check_bandwidth,
    check_grid,
    check_positive,
    check_responses,
    degree_for,
)
from .exceptions import DomainError, EstimationError
from .kernels import build_kernel, eval_kernel, kernel_order_for
from .model import Sample, design_points, replicate_rng, sample_errors

DEFAULT_GRID_SIZE = 512

_KINDS = {
    "integral": polyopt.KIND_INTEGRAL,
    "riemann": polyopt.KIND_RIEMANN,
}


def _responses(sample):
    if isinstance(sample, Sample):
        return sample.ys
    return check_responses(sample)


def optimal_bandwidth(alpha, beta, n):
    """Rate-optimal bandwidth ``((log n)/n)**(1/(alpha*beta + 1))``."""
    alpha = check_positive(alpha, "alpha")
    beta = check_positive(beta, "beta")
    if n < 3:
        raise DomainError(f"n must be >= 3, got {n}")
    return (math.log(n) / n) ** (1.0 / (alpha * beta + 1.0))


def default_smoothing_bandwidth(h, n, alpha, beta, margin=1.5):
    """Finite-sample smoothing bandwidth dominating the stochastic error rate.

    ``b = margin * (h**beta + (log(n)/(n h))**(1/alpha))**(1/(1 + 2 delta))``
    with ``delta = min(0.25, (beta - 1)/2)``.  For ``beta <= 1`` delta is set
    to 0.25; such fits are flagged ``outside_theory`` by ``smooth_boundary``.
    """
    delta = min(0.25, (beta - 1.0) / 2.0)
    if delta <= 0:
        delta = 0.25
    rate = h**beta + (math.log(n) / (n * h)) ** (1.0 / alpha)
    return margin * rate ** (1.0 / (1.0 + 2.0 * delta))


def default_grid(lo, hi, size=DEFAULT_GRID_SIZE):
    if not lo <= hi:
        raise DomainError(f"empty admissible interval [{lo}, {hi}]")
    return np.linspace(lo, hi, int(size))


def interior_design_grid(n, lo, hi):
    """Design points ``i/n`` inside ``[lo, hi]``."""
    x = design_points(n)
    eps = 1e-12
    return x[(x >= lo - eps) & (x <= hi + eps)]


@dataclass(frozen=True)
class BoundaryFit:
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    h: float
    degree: int
    objective_kind: str
    n: int
    beta: float = math.nan

    def at(self, x):
        """Fitted value at grid points ``x`` (exact grid matches only)."""
        idx = _grid_index(self.grid, x)
        return self.values[idx]


@dataclass(frozen=True)
class SmoothFit:
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    derivs: np.ndarray = field(repr=False)
    h: float
    b: float
    kernel_order: int
    n: int
    outside_theory: bool = False
    bias_shift: float = 0.0


@dataclass(frozen=True)
class BiasEstimate:
    value: float
    replicates: int
    standard_error: float


def _grid_index(grid, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = np.searchsorted(grid, x)
    idx = np.clip(idx, 0, grid.size - 1)
    left = np.clip(idx - 1, 0, grid.size - 1)
    closer = np.abs(grid[left] - x) < np.abs(grid[idx] - x)
    idx = np.where(closer, left, idx)
    if np.any(np.abs(grid[idx] - x) > 1e-9):
        raise DomainError("requested points are not on the fit grid")
    return idx


def _envelope(ys, grid, h, degree, kind):
    values, status = polyopt.envelope_on_grid(ys, grid, h, degree, kind)
    if np.any(status == polyopt.EMPTY_WINDOW):
        bad = grid[status == polyopt.EMPTY_WINDOW][0]
        raise EstimationError(f"no design point within h={h} of x={bad}")
    return values


def fit_boundary(sample, h, beta, grid=None, objective_kind="integral"):
    """LP boundary estimate at each grid point.

    Solves the window LP with degree ``ceil(beta) - 1`` (lowered to ``m - 1``
    when a window has only ``m`` points) and reports the polynomial's value
    at the window centre.
    """
    ys = _responses(sample)
    n = ys.size
    h = check_bandwidth(h)
    degree = degree_for(beta)
    if objective_kind not in _KINDS:
        raise DomainError(f"objective_kind must be one of {sorted(_KINDS)}")
    grid = default_grid(h, 1 - h) if grid is None else check_grid(grid, h, 1 - h)
    values = _envelope(ys, grid, h, degree, _KINDS[objective_kind])
    return BoundaryFit(grid, values, h, degree, objective_kind, n, float(beta))


def fit_local_linear_hvk(sample, h, grid=None):
    """Smallest intercept of a line lying above the window data.

    Uses raw offsets ``i/n - x`` and objective ``(1, 0)``; the argmin is the
    same as the degree-1 integral LP.
    """
    ys = _responses(sample)
    h = check_bandwidth(h)
    grid = default_grid(h, 1 - h) if grid is None else check_grid(grid, h, 1 - h)
    values = _envelope(ys, grid, h, 1, polyopt.KIND_UNIT)
    return BoundaryFit(grid, values, h, 1, "unit", ys.size, 2.0)


def fit_midrange_mean(sample, h, grid=None, beta=1.0, objective_kind="integral"):
    """Mean regression estimate from upper and lower envelopes.

    ``(g_up - g_down)/2`` where ``g_up`` is the boundary fit of ``Y`` and
    ``g_down`` the boundary fit of ``-Y``.  With ``beta <= 1`` this is the
    local midrange ``(min + max)/2`` of the window responses.
    """
    ys = _responses(sample)
    h = check_bandwidth(h)
    degree = degree_for(beta)
    grid = default_grid(h, 1 - h) if grid is None else check_grid(grid, h, 1 - h)
    kind = _KINDS[objective_kind]
    upper = _envelope(ys, grid, h, degree, kind)
    lower = _envelope(-ys, grid, h, degree, kind)
    return BoundaryFit(grid, (upper - lower) / 2.0, h, degree, f"midrange-{objective_kind}", ys.size, float(beta))


def _antiderivatives(K):
    """Antiderivatives of ``K(u)`` and ``u K(u)`` as coefficient arrays."""
    P = np.polynomial.polynomial
    c = K.coeffs
    return P.polyint(c), P.polyint(np.concatenate([[0.0], c]))


def _cell_integrals(dist_hi, dist_lo, b, K, p0, p1):
    """Cell moments for cells spanning ``x - z`` in ``[dist_lo, dist_hi]``.

    Returns the four integrals needed to convolve a locally linear function
    ``v + s (z - z_left)`` with ``K`` and ``K'``; ``dist_*`` are ``x - z``
    at the cell ends (``dist_hi`` at the left end ``z_left``).
    """
    P = np.polynomial.polynomial
    u_hi = np.clip(dist_hi / b, -1.0, 1.0)
    u_lo = np.clip(dist_lo / b, -1.0, 1.0)
    i0 = P.polyval(u_hi, p0) - P.polyval(u_lo, p0)
    i1 = P.polyval(u_hi, p1) - P.polyval(u_lo, p1)
    k_hi, k_lo = eval_kernel(K, u_hi), eval_kernel(K, u_lo)
    j0 = k_hi - k_lo
    # int u K'(u) du = u K(u) - int K(u) du
    j1 = (u_hi * k_hi - u_lo * k_lo) - i0
    # on the cell, v + s (z - z_left) = v + s (x - z_left) - s b u
    return i0, dist_hi * i0 - b * i1, j0 / b, (dist_hi * j0 - b * j1) / b


def _smooth_general(z, v, slope, grid, b, K, chunk):
    p0, p1 = _antiderivatives(K)
    values = np.empty(grid.size)
    derivs = np.empty(grid.size)
    for start in range(0, grid.size, chunk):
        x = grid[start:start + chunk, None]
        lo = max(np.searchsorted(z, x.min() - b) - 1, 0)
        hi = min(np.searchsorted(z, x.max() + b) + 1, z.size - 1)
        zl, zr = z[None, lo:hi], z[None, lo + 1:hi + 1]
        a0, a1, d0, d1 = _cell_integrals(x - zl, x - zr, b, K, p0, p1)
        vv, ss = v[lo:hi], slope[lo:hi]
        values[start:start + chunk] = a0 @ vv + a1 @ ss
        derivs[start:start + chunk] = d0 @ vv + d1 @ ss
    return values, derivs


def _smooth_on_lattice(v, slope, k, step, b, K):
    """Same integrals as ``_smooth_general`` when grid and cells share the 1/n lattice.

    Cell weights then depend only on the index offset, so the sums become
    discrete convolutions.
    """
    p0, p1 = _antiderivatives(K)
    reach = int(math.ceil(b / step)) + 1
    offsets = np.arange(-reach, reach + 2)
    a0, a1, d0, d1 = _cell_integrals(offsets * step, (offsets - 1) * step, b, K, p0, p1)
    idx = k + reach
    values = np.convolve(v, a0)[idx] + np.convolve(slope, a1)[idx]
    derivs = np.convolve(v, d0)[idx] + np.convolve(slope, d1)[idx]
    return values, derivs


def smooth_boundary(bfit, b, K=None, grid=None, chunk=128):
    """Kernel-smoothed boundary estimate and its derivative.

    ``bfit`` must be evaluated on a grid of step at most ``1/n`` covering
    ``[h, 1-h]``.  Between grid points the boundary fit is interpolated
    linearly and each cell is integrated exactly against the polynomial
    kernel, so constant and linear inputs are reproduced to rounding error.
    ``grid`` must lie in ``[h + b, 1 - h - b]``.
    """
    h, n = bfit.h, bfit.n
    b = check_positive(b, "b")
    if h + b >= 0.5:
        raise DomainError(f"h + b = {h + b:.4g} leaves no interior interval")
    if K is None:
        K = build_kernel(kernel_order_for(bfit.beta if np.isfinite(bfit.beta) else 2.0))
    z = np.asarray(bfit.grid, dtype=float)
    if z.size < 2 or np.max(np.diff(z)) > 1.0 / n + 1e-12:
        raise DomainError("boundary fit grid must have step <= 1/n")
    if z[0] > h + 1.0 / n + 1e-12 or z[-1] < 1 - h - 1.0 / n - 1e-12:
        raise DomainError("boundary fit grid must cover [h, 1-h]")
    lo, hi = h + b, 1 - h - b
    grid = default_grid(lo, hi) if grid is None else check_grid(grid, lo, hi)

    v = bfit.values
    slope = np.diff(v) / np.diff(z)
    step = 1.0 / n
    k = (grid - z[0]) / step
    on_lattice = np.allclose(np.diff(z), step, rtol=0, atol=1e-12) and np.allclose(k, np.round(k), atol=1e-6)
    if on_lattice:
        values, derivs = _smooth_on_lattice(v[:-1], slope, np.round(k).astype(int), step, b, K)
    else:
        values, derivs = _smooth_general(z, v[:-1], slope, grid, b, K, chunk)
    outside = not (np.isfinite(bfit.beta) and bfit.beta > 1)
    return SmoothFit(grid, values, derivs, h, b, K.order, n, outside)


def bias_corrected_smooth(sfit, bias):
    """Shift the smoothed values by minus the simulated zero-function bias."""
    value = bias.value if isinstance(bias, BiasEstimate) else float(bias)
    return replace(sfit, values=sfit.values - value, bias_shift=sfit.bias_shift + value)


def _center_estimate(eps, n, h, degree, kind):
    return polyopt.envelope_on_grid(eps, np.array([0.5]), h, degree, kind)[0][0]


def center_draws(law, n, h, beta, indices, seed=0, stream=(), objective_kind="integral"):
    """Boundary estimates at 1/2 for zero-function samples, one per replicate index.

    Replicate ``r`` draws its errors from ``replicate_rng(seed, r, *stream)``.
    """
    h = check_bandwidth(h)
    degree = degree_for(beta)
    kind = _KINDS[objective_kind]
    indices = np.asarray(indices, dtype=np.int64)
    draws = np.empty(indices.size)
    for j, r in enumerate(indices):
        eps = sample_errors(law, n, replicate_rng(seed, r, *stream))
        draws[j] = _center_estimate(eps, n, h, degree, kind)
    return draws


def estimate_bias_g0(law, n, h, beta, R=1000, seed=0, objective_kind="integral", stream=()):
    """Monte-Carlo mean of the boundary estimate at 1/2 when the true function is 0."""
    if R < 100:
        raise DomainError(f"need at least 100 replicates, got {R}")
    draws = center_draws(law, n, h, beta, np.arange(int(R)), seed, stream, objective_kind)
    se = float(np.std(draws, ddof=1) / math.sqrt(R))
    return BiasEstimate(float(np.mean(draws)), int(R), se)


# --------------------------------------------------------------------------
# scikit-learn style estimators


def _check_design(X, y):
    y = check_responses(y)
    n = y.size
    if X is None:
        return y
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise DomainError("X must have a single column (the design points)")
        X = X[:, 0]
    if X.shape != (n,):
        raise DomainError(f"X has {X.shape[0]} rows but y has {n}")
    order = np.argsort(X, kind="stable")
    if not np.allclose(X[order], design_points(n), atol=1e-9):
        raise DomainError("X must be the equidistant design i/n, i = 1..n")
    return y[order]


def _as_points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[:, 0]
    return np.atleast_1d(X)


class BoundaryRegressor(RegressorMixin, BaseEstimator):
    """Local polynomial upper-envelope estimator of a boundary function.

    Parameters
    ----------
    beta : float
        Assumed smoothness; the polynomial degree is ``ceil(beta) - 1``.
    bandwidth : float or None
        Window half-width ``h``.  ``None`` uses the rate-optimal choice for
        the given ``alpha``.
    alpha : float
        Extreme-value index of the errors (only used when ``bandwidth`` is None).
    objective : {"integral", "riemann"}
        Exact local integral or its Riemann sum over the design points.
    """

    def __init__(self, beta=2.0, bandwidth=None, alpha=1.0, objective="integral"):
        self.beta = beta
        self.bandwidth = bandwidth
        self.alpha = alpha
        self.objective = objective

    def _resolve_bandwidth(self, n):
        if self.bandwidth is None:
            return optimal_bandwidth(self.alpha, self.beta, n)
        return check_bandwidth(self.bandwidth)

    def fit(self, X, y):
        self.y_ = _check_design(X, y)
        self.n_ = self.y_.size
        self.h_ = self._resolve_bandwidth(self.n_)
        self.degree_ = degree_for(self.beta)
        return self

    def predict(self, X):
        check_is_fitted(self, "y_")
        return fit_boundary(self.y_, self.h_, self.beta, _as_points(X), self.objective).values

    def boundary_fit(self, grid=None):
        check_is_fitted(self, "y_")
        return fit_boundary(self.y_, self.h_, self.beta, grid, self.objective)


class MidrangeRegressor(BoundaryRegressor):
    """Mean regression for bounded symmetric errors via upper and lower envelopes."""

    def predict(self, X):
        check_is_fitted(self, "y_")
        return fit_midrange_mean(self.y_, self.h_, _as_points(X), self.beta, self.objective).values


class SmoothBoundaryRegressor(BoundaryRegressor):
    """Kernel-smoothed boundary estimator with optional bias correction.

    Parameters
    ----------
    smoothing_bandwidth : float or None
        ``b``; ``None`` uses ``default_smoothing_bandwidth``.
    kernel_order : int or None
        Even kernel order; ``None`` picks the smallest admissible one for ``beta``.
    bias : None, float or ErrorLaw
        ``None`` for no correction, a number to subtract, or an error law
        under which the zero-function bias is simulated with ``bias_replicates``.
    """

    def __init__(self, beta=2.0, bandwidth=None, alpha=1.0, objective="integral",
                 smoothing_bandwidth=None, kernel_order=None, bias=None,
                 bias_replicates=1000, random_state=0):
        super().__init__(beta=beta, bandwidth=bandwidth, alpha=alpha, objective=objective)
        self.smoothing_bandwidth = smoothing_bandwidth
        self.kernel_order = kernel_order
        self.bias = bias
        self.bias_replicates = bias_replicates
        self.random_state = random_state

    def fit(self, X, y):
        super().fit(X, y)
        n, h = self.n_, self.h_
        if self.smoothing_bandwidth is None:
            self.b_ = default_smoothing_bandwidth(h, n, self.alpha, self.beta)
        else:
            self.b_ = check_positive(self.smoothing_bandwidth, "smoothing_bandwidth")
        if h + self.b_ >= 0.5:
            raise DomainError(f"h + b = {h + self.b_:.4g} >= 1/2: no interior interval")
        self.kernel_ = build_kernel(self.kernel_order or kernel_order_for(self.beta))
        z = interior_design_grid(n, h, 1 - h)
        self.boundary_fit_ = fit_boundary(self.y_, h, self.beta, z, self.objective)
        if self.bias is None:
            self.bias_ = BiasEstimate(0.0, 0, 0.0)
        elif isinstance(self.bias, (int, float)):
            self.bias_ = BiasEstimate(float(self.bias), 0, 0.0)
        else:
            self.bias_ = estimate_bias_g0(self.bias, n, h, self.beta, self.bias_replicates,
                                          self.random_state, self.objective)
        return self

    def _smooth(self, X):
        check_is_fitted(self, "boundary_fit_")
        sfit = smooth_boundary(self.boundary_fit_, self.b_, self.kernel_, _as_points(X))
        return bias_corrected_smooth(sfit, self.bias_)

    def predict(self, X):
        return self._smooth(X).values

    def predict_derivative(self, X):
        return self._smooth(X).derivs

    @property
    def interior_(self):
        check_is_fitted(self, "b_")
        return (self.h_ + self.b_, 1.0 - self.h_ - self.b_)
