"""Higher-order polynomial kernels on [-1, 1].

Kernels have the form ``K(u) = (1 - u**2)**2 * q(u)`` with ``q`` even, so
``K(+-1) = K'(+-1) = 0`` hold structurally and the moment conditions reduce
to a small linear system in the coefficients of ``q``.  The system is solved
in exact rational arithmetic.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import DomainError

MAX_ORDER = 12


def _biweight_moment(s):
    """``int_{-1}^{1} (1-u^2)^2 u^(2s) du`` as an exact fraction."""
    return 2 * (Fraction(1, 2 * s + 1) - Fraction(2, 2 * s + 3) + Fraction(1, 2 * s + 5))


def _solve_exact(A, b):
    n = len(A)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            raise DomainError("singular moment system")
        M[col], M[pivot] = M[pivot], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] / M[r][r] for r in range(n)]


@dataclass(frozen=True)
class HigherOrderKernel:
    """Polynomial kernel with vanishing moments ``1, ..., order-1``.

    ``q_coeffs`` are the exact coefficients of ``q`` in the basis
    ``1, u^2, u^4, ...``; ``coeffs`` is the expanded polynomial ``K`` in
    increasing powers of ``u`` (floats).
    """

    order: int
    q_coeffs: tuple
    exact_coeffs: tuple

    @property
    def coeffs(self):
        return np.array([float(c) for c in self.exact_coeffs])

    @property
    def derivative_coeffs(self):
        c = self.coeffs
        return c[1:] * np.arange(1, c.size)

    def __call__(self, u):
        return eval_kernel(self, u)

    def derivative(self, u):
        return eval_kernel_derivative(self, u)

    def lipschitz_derivative(self):
        """``max |K''|`` on [-1, 1], the Lipschitz constant of ``K'``."""
        c2 = self.derivative_coeffs[1:] * np.arange(1, self.derivative_coeffs.size)
        u = np.linspace(-1, 1, 20001)
        return float(np.max(np.abs(np.polynomial.polynomial.polyval(u, c2))))


def build_kernel(order):
    """Kernel of the given even order built on the biweight factor.

    ``order=2`` gives the biweight ``15/16 (1-u^2)^2``.
    """
    L = int(order)
    if L < 2 or L % 2:
        raise DomainError(f"kernel order must be an even integer >= 2, got {order}")
    if L > MAX_ORDER:
        raise DomainError(f"kernel order above {MAX_ORDER} is not supported")
    J = L // 2
    A = [[_biweight_moment(i + j) for j in range(J)] for i in range(J)]
    b = [Fraction(1)] + [Fraction(0)] * (J - 1)
    q = _solve_exact(A, b)
    # expand (1 - 2u^2 + u^4) * sum_j q_j u^(2j)
    full = [Fraction(0)] * (2 * J + 4)
    for j, qj in enumerate(q):
        for p, f in ((0, 1), (2, -2), (4, 1)):
            full[2 * j + p] += f * qj
    while full and full[-1] == 0:
        full.pop()
    return HigherOrderKernel(L, tuple(q), tuple(full))


def kernel_order_for(beta):
    """Smallest even order that is at least ``floor(beta) + 1``."""
    need = int(math.floor(float(beta))) + 1
    return max(2, need + (need % 2))


def kernel_moment(K, r):
    """Exact ``int_{-1}^{1} u^r K(u) du`` by term-wise integration."""
    if r < 0:
        raise DomainError("moment order must be >= 0")
    total = Fraction(0)
    for p, c in enumerate(K.exact_coeffs):
        if (p + r) % 2 == 0:
            total += c * Fraction(2, p + r + 1)
    return float(total)


def _horner(coeffs, u):
    out = np.zeros_like(u)
    for c in coeffs[::-1]:
        out = out * u + c
    return out


def eval_kernel(K, u):
    u = np.asarray(u, dtype=float)
    out = np.where(np.abs(u) <= 1.0, _horner(K.coeffs, u), 0.0)
    return out if out.ndim else float(out)


def eval_kernel_derivative(K, u):
    u = np.asarray(u, dtype=float)
    out = np.where(np.abs(u) <= 1.0, _horner(K.derivative_coeffs, u), 0.0)
    return out if out.ndim else float(out)


def kernel_table(K, grid_size):
    """Rows ``(u, K(u), K'(u))`` on an equispaced grid over [-1, 1]."""
    u = np.linspace(-1.0, 1.0, int(grid_size))
    return np.column_stack([u, eval_kernel(K, u), eval_kernel_derivative(K, u)])
