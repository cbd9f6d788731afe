"""Minimal-area polynomial lying above a set of points.

For window abscissas ``t_i`` in ``[-1, 1]`` and responses ``y_i`` the primal
problem is::

    minimize    sum_k w_k c_k
    subject to  sum_k c_k t_i**k >= y_i    for every i

with free coefficients ``c``.  It is solved through its dual

    maximize    sum_i lam_i y_i
    subject to  sum_i lam_i t_i**k = w_k,  lam >= 0

by a revised simplex method whose basis has only ``d + 1`` rows.  The basic
columns are the binding constraints, and the primal coefficients are the
polynomial interpolating the data at those points.

The simplex kernels are compiled with numba; ``brute_force_solve`` is a
plain-numpy vertex enumeration used as an independent check.
"""

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import DegreeTooHigh, DomainError, NumericalDegeneracy

OPTIMAL = 0
DUAL_INFEASIBLE = 1
UNBOUNDED = 2
SINGULAR = 3
MAX_ITER = 4
EMPTY_WINDOW = 5

_STATUS_TEXT = {
    DUAL_INFEASIBLE: "dual infeasible: objective weights are not a moment vector of the window",
    UNBOUNDED: "dual unbounded (primal infeasible); abscissas are probably not distinct",
    SINGULAR: "numerically singular basis",
    MAX_ITER: "iteration limit reached",
    EMPTY_WINDOW: "empty window",
}

PIVOT_WARN = 1e-12
PIVOT_FAIL = 1e-14
BLAND_AFTER = 2
BRUTE_FORCE_MAX_POINTS = 40

KIND_INTEGRAL = 0
KIND_RIEMANN = 1
KIND_UNIT = 2


class ConditionWarning(RuntimeWarning):
    """A basis pivot fell below 1e-12 during elimination."""


@dataclass(frozen=True)
class WindowData:
    """Standardized abscissas ``t_i = (i/n - x)/h`` and responses of one window."""

    ts: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float).ravel()
        ys = np.asarray(self.ys, dtype=float).ravel()
        if ts.size != ys.size:
            raise DomainError("ts and ys must have the same length")
        if ts.size < 1:
            raise DomainError("a window needs at least one point")
        if np.any(np.diff(ts) <= 0):
            raise DomainError("window abscissas must be strictly increasing")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "ys", ys)

    @property
    def m(self):
        return self.ts.size


@dataclass(frozen=True)
class ObjectiveWeights:
    w: np.ndarray

    @property
    def degree(self):
        return len(self.w) - 1


@dataclass(frozen=True)
class PolyFit:
    """Optimal polynomial ``p(t) = sum_k coeffs[k] t**k`` for one window."""

    degree: int
    coeffs: np.ndarray
    objective_value: float
    active_set: tuple
    dual_value: float = math.nan
    iterations: int = 0

    def __call__(self, t):
        return eval_poly(self, t)


def integral_objective(d):
    """Weights of ``int_{-1}^{1} p(t) dt``: ``2/(k+1)`` for even ``k``, else 0."""
    if d < 0:
        raise DomainError(f"degree must be >= 0, got {d}")
    k = np.arange(d + 1)
    return ObjectiveWeights(np.where(k % 2 == 0, 2.0 / (k + 1), 0.0))


def riemann_objective(d, ts):
    """Weights of the Riemann sum ``sum_i p(t_i)``: ``w_k = sum_i t_i**k``."""
    if d < 0:
        raise DomainError(f"degree must be >= 0, got {d}")
    ts = np.asarray(ts, dtype=float)
    if ts.size < 1:
        raise DomainError("riemann_objective needs at least one abscissa")
    return ObjectiveWeights(np.vander(ts, d + 1, increasing=True).sum(axis=0))


def eval_poly(fit, t):
    """Horner evaluation of the fitted polynomial (``fit`` may also be a coefficient array)."""
    coeffs = fit.coeffs if isinstance(fit, PolyFit) else np.asarray(fit, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c in coeffs[::-1]:
        out = out * t + c
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _lu_solve(A, b):
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Returns ``(x, min_abs_pivot)``; ``A`` and ``b`` are not modified.
    """
    k = A.shape[0]
    M = A.copy()
    x = b.copy()
    min_piv = np.inf
    for col in range(k):
        p = col
        best = abs(M[col, col])
        for r in range(col + 1, k):
            if abs(M[r, col]) > best:
                best = abs(M[r, col])
                p = r
        if best < min_piv:
            min_piv = best
        if best == 0.0:
            return x, 0.0
        if p != col:
            for c in range(k):
                tmp = M[col, c]
                M[col, c] = M[p, c]
                M[p, c] = tmp
            tmp = x[col]
            x[col] = x[p]
            x[p] = tmp
        for r in range(col + 1, k):
            f = M[r, col] / M[col, col]
            if f != 0.0:
                for c in range(col, k):
                    M[r, c] -= f * M[col, c]
                x[r] -= f * x[col]
    for r in range(k - 1, -1, -1):
        s = x[r]
        for c in range(r + 1, k):
            s -= M[r, c] * x[c]
        x[r] = s / M[r, r]
    return x, min_piv


@njit(cache=True)
def _fill_column(V, sigma, j, out):
    m = V.shape[0]
    k = out.shape[0]
    if j < m:
        for r in range(k):
            out[r] = V[j, r]
    else:
        for r in range(k):
            out[r] = 0.0
        out[j - m] = sigma[j - m]


@njit(cache=True)
def _basis_matrix(V, sigma, basis, B):
    k = basis.shape[0]
    col = np.empty(k)
    for r in range(k):
        _fill_column(V, sigma, basis[r], col)
        for c in range(k):
            B[r, c] = col[c]


@njit(cache=True)
def _cost(y, j, phase_one):
    m = y.shape[0]
    if phase_one:
        return 0.0 if j < m else -1.0
    return y[j]


@njit(cache=True)
def _run_phase(V, y, sigma, w, basis, phase_one, tol, max_iter, state):
    """One simplex phase on the dual; ``basis`` is updated in place.

    ``state`` holds ``[iterations, min_pivot]`` and is updated in place.
    Returns a status code.
    """
    m = V.shape[0]
    k = basis.shape[0]
    n_cols = m + k if phase_one else m
    B = np.empty((k, k))
    cB = np.empty(k)
    col = np.empty(k)
    bland = False
    degenerate_run = 0
    for _ in range(max_iter):
        _basis_matrix(V, sigma, basis, B)
        for r in range(k):
            cB[r] = _cost(y, basis[r], phase_one)
        coef, piv1 = _lu_solve(B, cB)
        lam, piv2 = _lu_solve(B.T.copy(), w)
        piv = min(piv1, piv2)
        if piv < state[1]:
            state[1] = piv
        if piv < PIVOT_FAIL:
            return SINGULAR
        # pricing: reduced cost of column j is cost_j - col_j . coef
        enter = -1
        best = tol
        for j in range(n_cols):
            in_basis = False
            for r in range(k):
                if basis[r] == j:
                    in_basis = True
                    break
            if in_basis:
                continue
            if j < m:
                s = 0.0
                for c in range(k):
                    s += V[j, c] * coef[c]
            else:
                s = sigma[j - m] * coef[j - m]
            red = _cost(y, j, phase_one) - s
            if red > best:
                best = red
                enter = j
                if bland:
                    break
        if enter < 0:
            return OPTIMAL
        _fill_column(V, sigma, enter, col)
        u, piv3 = _lu_solve(B.T.copy(), col)
        if piv3 < PIVOT_FAIL:
            return SINGULAR
        umax = 0.0
        for r in range(k):
            umax = max(umax, abs(u[r]))
        leave = -1
        theta = np.inf
        for r in range(k):
            if u[r] > 1e-9 * umax:
                ratio = max(lam[r], 0.0) / u[r]
                slack = 1e-15 * (1.0 + abs(theta)) if leave >= 0 else 0.0
                if leave < 0 or ratio < theta - slack:
                    theta = ratio
                    leave = r
                elif ratio <= theta + slack and basis[r] < basis[leave]:
                    leave = r
        if leave < 0:
            return UNBOUNDED
        # Dantzig pricing while making progress; Bland's rule through any long
        # run of degenerate pivots, which rules out cycling
        if theta <= 1e-14:
            degenerate_run += 1
            if degenerate_run >= BLAND_AFTER:
                bland = True
        else:
            degenerate_run = 0
            bland = False
        basis[leave] = enter
        state[0] += 1
    return MAX_ITER


@njit(cache=True)
def _solve_dual(V, y, w, init_basis, tol):
    """Solve the dual LP. Returns ``(status, basis, coef, lam, iterations, min_pivot)``."""
    m, k = V.shape
    sigma = np.ones(k)
    for r in range(k):
        if w[r] < 0:
            sigma[r] = -1.0
    state = np.zeros(2)
    state[1] = np.inf
    max_iter = 50 * (m + k) + 100
    basis = init_basis.copy()
    B = np.empty((k, k))

    warm = True
    for r in range(k):
        if basis[r] < 0 or basis[r] >= m:
            warm = False
    if warm:
        _basis_matrix(V, sigma, basis, B)
        lam, piv = _lu_solve(B.T.copy(), w)
        if piv < 1e-9:
            warm = False
        else:
            wscale = 0.0
            for r in range(k):
                wscale = max(wscale, abs(w[r]))
            for r in range(k):
                if lam[r] < -1e-12 * (1.0 + wscale):
                    warm = False

    if not warm:
        for r in range(k):
            basis[r] = m + r
        status = _run_phase(V, y, sigma, w, basis, True, 1e-12, max_iter, state)
        if status != OPTIMAL:
            return status, basis, np.zeros(k), np.zeros(k), int(state[0]), state[1]
        _basis_matrix(V, sigma, basis, B)
        lam, piv = _lu_solve(B.T.copy(), w)
        infeas = 0.0
        wscale = 1.0
        for r in range(k):
            wscale = max(wscale, abs(w[r]))
            if basis[r] >= m:
                infeas += lam[r]
        if infeas > 1e-9 * wscale:
            return DUAL_INFEASIBLE, basis, np.zeros(k), np.zeros(k), int(state[0]), state[1]
        # drive zero-level artificials out of the basis
        col = np.empty(k)
        for r in range(k):
            if basis[r] < m:
                continue
            _basis_matrix(V, sigma, basis, B)
            best_j = -1
            best_u = 1e-9
            for j in range(m):
                taken = False
                for q in range(k):
                    if basis[q] == j:
                        taken = True
                if taken:
                    continue
                _fill_column(V, sigma, j, col)
                u, _piv = _lu_solve(B.T.copy(), col)
                if abs(u[r]) > best_u:
                    best_u = abs(u[r])
                    best_j = j
            if best_j < 0:
                return SINGULAR, basis, np.zeros(k), np.zeros(k), int(state[0]), state[1]
            basis[r] = best_j

    status = _run_phase(V, y, sigma, w, basis, False, tol, max_iter, state)
    _basis_matrix(V, sigma, basis, B)
    yB = np.empty(k)
    for r in range(k):
        yB[r] = y[basis[r]]
    coef, piv1 = _lu_solve(B, yB)
    lam, piv2 = _lu_solve(B.T.copy(), w)
    piv = min(piv1, piv2)
    if piv < state[1]:
        state[1] = piv
    if status == OPTIMAL and piv < PIVOT_FAIL:
        status = SINGULAR
    return status, basis, coef, lam, int(state[0]), state[1]


@njit(cache=True)
def _window_bounds(n, x, h):
    """1-based index range ``lo..hi`` of design points with ``|i/n - x| <= h``."""
    lo = int(math.ceil(n * (x - h))) - 1
    hi = int(math.floor(n * (x + h))) + 1
    if lo < 1:
        lo = 1
    if hi > n:
        hi = n
    eps = 1e-12 * max(1.0, h)
    while lo <= hi and abs(lo / n - x) > h + eps:
        lo += 1
    while hi >= lo and abs(hi / n - x) > h + eps:
        hi -= 1
    return lo, hi


@njit(cache=True)
def _envelope_on_grid(ys, grid, h, degree, kind, nodes):
    """Evaluate ``p(0)`` of the window LP at every grid point.

    ``kind``: 0 integral weights, 1 Riemann weights (both on standardized
    abscissas), 2 unit weights ``(1, 0, ...)`` on raw offsets ``i/n - x``.
    ``nodes`` are Gauss-Legendre nodes for ``degree + 1`` points, used to
    pick a starting basis.  Returns ``(values, status, min_pivot, iterations)``.
    """
    n = ys.shape[0]
    G = grid.shape[0]
    values = np.empty(G)
    status = np.zeros(G, dtype=np.int64)
    min_piv = np.full(G, np.inf)
    iters = np.zeros(G, dtype=np.int64)
    prev = np.full(degree + 1, -1, dtype=np.int64)
    prev_lo = -1
    for g in range(G):
        x = grid[g]
        lo, hi = _window_bounds(n, x, h)
        m = hi - lo + 1
        if m < 1:
            values[g] = np.nan
            status[g] = EMPTY_WINDOW
            continue
        d = degree if degree <= m - 1 else m - 1
        k = d + 1
        if d == 0:
            best = ys[lo - 1]
            for i in range(lo, hi + 1):
                if ys[i - 1] > best:
                    best = ys[i - 1]
            values[g] = best
            prev_lo = -1
            continue
        V = np.empty((m, k))
        yw = np.empty(m)
        ymax = 1.0
        for i in range(m):
            t = (lo + i) / n - x
            if kind != KIND_UNIT:
                t = t / h
            v = 1.0
            for c in range(k):
                V[i, c] = v
                v *= t
            yw[i] = ys[lo - 1 + i]
            if abs(yw[i]) > ymax:
                ymax = abs(yw[i])
        w = np.zeros(k)
        if kind == KIND_INTEGRAL:
            for c in range(0, k, 2):
                w[c] = 2.0 / (c + 1)
        elif kind == KIND_RIEMANN:
            for i in range(m):
                for c in range(k):
                    w[c] += V[i, c]
        else:
            w[0] = 1.0
        init = np.full(k, -1, dtype=np.int64)
        ok = prev_lo >= 0 and prev.shape[0] == k
        if ok:
            for r in range(k):
                local = prev[r] - lo
                if local < 0 or local >= m:
                    ok = False
                    break
                init[r] = local
        if not ok and nodes.shape[0] == k:
            ok = True
            for r in range(k):
                local = int(round((x + nodes[r] * h) * n)) - lo
                if local < 0:
                    local = 0
                if local > m - 1:
                    local = m - 1
                for q in range(r):
                    if init[q] == local:
                        ok = False
                init[r] = local
        if not ok:
            for r in range(k):
                init[r] = -1
        st, basis, coef, lam, it, piv = _solve_dual(V, yw, w, init, 1e-11 * ymax)
        status[g] = st
        min_piv[g] = piv
        iters[g] = it
        values[g] = coef[0] if st == OPTIMAL else np.nan
        if st == OPTIMAL and k == degree + 1:
            for r in range(k):
                prev[r] = basis[r] + lo
            prev_lo = lo
        else:
            prev_lo = -1
    return values, status, min_piv, iters


# --------------------------------------------------------------------------
# public API


def _raise_for_status(status, **diag):
    if status == OPTIMAL:
        return
    raise NumericalDegeneracy(_STATUS_TEXT.get(int(status), "solver failure"), status=int(status), **diag)


def solve_upper_polynomial(win, obj, d):
    """Optimal basic solution of the window LP via the dual revised simplex.

    Parameters
    ----------
    win : WindowData
    obj : ObjectiveWeights
        Must have ``d + 1`` entries.
    d : int
        Polynomial degree.

    Returns
    -------
    PolyFit
        ``active_set`` holds the (sorted) basic constraint indices.

    Raises
    ------
    DegreeTooHigh
        If the window has fewer than ``d + 1`` points.
    NumericalDegeneracy
        If the dual is infeasible or the basis becomes singular.
    """
    d = int(d)
    w = np.asarray(obj.w if isinstance(obj, ObjectiveWeights) else obj, dtype=float)
    if w.size != d + 1:
        raise DomainError(f"objective has {w.size} weights, degree {d} needs {d + 1}")
    if win.m < d + 1:
        raise DegreeTooHigh(win.m, d)
    ys = win.ys
    if d == 0:
        i = int(np.argmax(ys))
        return PolyFit(0, np.array([ys[i]]), float(w[0] * ys[i]), (i,), float(w[0] * ys[i]), 0)
    V = np.vander(win.ts, d + 1, increasing=True)
    init = np.full(d + 1, -1, dtype=np.int64)
    tol = 1e-11 * max(1.0, float(np.max(np.abs(ys))))
    status, basis, coef, lam, iters, piv = _solve_dual(V, ys, w, init, tol)
    _raise_for_status(status, basis=tuple(int(b) for b in basis), min_pivot=float(piv), iterations=int(iters))
    if piv < PIVOT_WARN:
        warnings.warn(f"basis pivot {piv:.3g} below {PIVOT_WARN}", ConditionWarning, stacklevel=2)
    order = np.argsort(basis)
    return PolyFit(
        degree=d,
        coeffs=np.asarray(coef, dtype=float),
        objective_value=float(w @ coef),
        active_set=tuple(int(basis[i]) for i in order),
        dual_value=float(ys[basis] @ lam),
        iterations=int(iters),
    )


def brute_force_solve(win, obj, d):
    """Enumerate every ``(d+1)``-subset of constraints and keep the best optimal vertex.

    A vertex is optimal when it is feasible and its basis multipliers
    ``V_B^{-T} w`` are nonnegative.  If no vertex passes, the problem is
    unbounded and the same error as the simplex is raised.  Independent of
    the simplex code; ties go to the lexicographically smallest active set.
    """
    d = int(d)
    w = np.asarray(obj.w if isinstance(obj, ObjectiveWeights) else obj, dtype=float)
    if win.m < d + 1:
        raise DegreeTooHigh(win.m, d)
    if win.m > BRUTE_FORCE_MAX_POINTS:
        raise DomainError(f"brute force limited to {BRUTE_FORCE_MAX_POINTS} points, got {win.m}")
    ts, ys = win.ts, win.ys
    V = np.vander(ts, d + 1, increasing=True)
    subsets = np.array(list(itertools.combinations(range(win.m), d + 1)), dtype=np.int64)
    VB = V[subsets]
    # distinct abscissas make every square Vandermonde block invertible
    coefs = np.linalg.solve(VB, ys[subsets][..., None])[..., 0]
    lams = np.linalg.solve(np.swapaxes(VB, 1, 2), np.broadcast_to(w, coefs.shape)[..., None])[..., 0]
    feasible = np.min(coefs @ V.T - ys, axis=1) >= -1e-9 * max(1.0, np.max(np.abs(ys)))
    dual_ok = np.min(lams, axis=1) >= -1e-9 * max(1.0, np.max(np.abs(w)))
    ok = np.flatnonzero(feasible & dual_ok)
    if ok.size == 0:
        _raise_for_status(DUAL_INFEASIBLE, iterations=0)
    values = coefs[ok] @ w
    k = ok[np.flatnonzero(values <= values.min() + 1e-12)[0]]
    return PolyFit(d, coefs[k], float(coefs[k] @ w), tuple(int(i) for i in subsets[k]))


def envelope_on_grid(ys, grid, h, degree, kind=KIND_INTEGRAL):
    """``p(0)`` of the window LP at each grid point of a fixed equidistant design.

    Returns ``(values, degrees_lowered)``; raises on solver failure.
    """
    ys = np.ascontiguousarray(ys, dtype=float)
    grid = np.ascontiguousarray(np.atleast_1d(grid), dtype=float)
    nodes = np.polynomial.legendre.leggauss(degree + 1)[0] if degree >= 1 else np.zeros(1)
    values, status, piv, iters = _envelope_on_grid(ys, grid, float(h), int(degree), int(kind), nodes)
    bad = np.flatnonzero(status != OPTIMAL)
    if bad.size:
        g = int(bad[0])
        if status[g] == EMPTY_WINDOW:
            return values, status
        _raise_for_status(status[g], x=float(grid[g]), min_pivot=float(piv[g]), iterations=int(iters[g]))
    if np.any(piv < PIVOT_WARN):
        warnings.warn(f"basis pivot {piv.min():.3g} below {PIVOT_WARN}", ConditionWarning, stacklevel=2)
    return values, status
