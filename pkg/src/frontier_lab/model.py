"""Error laws, regression functions and the fixed-design sampling model.

Observations follow ``Y_i = g(i/n) + eps_i`` for ``i = 1, ..., n`` with i.i.d.
errors.  Every law exposes its cdf, an inverse cdf and the extreme-value index
at the upper endpoint of its support.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import DomainError

QUANTILE_TOL = 1e-12


def replicate_rng(seed, index, *subkeys):
    """Independent counter-based stream for Monte-Carlo replicate ``index``.

    The stream is keyed by ``(seed, index, *subkeys)`` only, so results do
    not depend on how replicates are distributed over workers.
    """
    key = (int(index),) + tuple(int(k) for k in subkeys)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


class ErrorLaw:
    """Base class for error distributions.

    Subclasses implement ``_cdf`` and, where a closed form exists,
    ``_quantile``; otherwise quantiles fall back to bisection on the cdf.
    """

    one_sided = False

    @property
    def support(self):
        raise NotImplementedError

    @property
    def alpha(self):
        raise NotImplementedError

    def _cdf(self, y):
        raise NotImplementedError

    def _quantile(self, u):
        return _bisect_quantile(self, u)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = self.support
        out = np.where(y >= hi, 1.0, np.where(y < lo, 0.0, self._cdf(np.clip(y, lo, hi))))
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u >= 1)) or np.any(np.isnan(u)):
            raise DomainError("quantile requires 0 < u < 1")
        out = self._quantile(u)
        return out if np.ndim(out) else float(out)

    def sample(self, n, seed=0):
        return sample_errors(self, n, seed)


def _bisect_quantile(law, u, tol=QUANTILE_TOL):
    u = np.asarray(u, dtype=float)
    lo, hi = law.support
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DomainError("bisection needs a bounded support")
    a = np.full(u.shape, lo)
    b = np.full(u.shape, hi)
    while np.max(b - a, initial=0.0) > tol:
        mid = 0.5 * (a + b)
        below = law._cdf(mid) < u
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class PowerTail(ErrorLaw):
    """``F(y) = 1 - |y|**alpha`` on ``[-1, 0]``."""

    alpha: float = 1.0
    one_sided = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"PowerTail needs alpha > 0, got {self.alpha}")

    @property
    def support(self):
        return (-1.0, 0.0)

    def _cdf(self, y):
        return 1.0 - np.abs(y) ** self.alpha

    def _quantile(self, u):
        return -((1.0 - u) ** (1.0 / self.alpha))


@dataclass(frozen=True)
class MirroredExp(ErrorLaw):
    """Mirrored exponential, ``F(y) = exp(theta * y)`` for ``y <= 0``."""

    theta: float = 1.0
    one_sided = True

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError(f"MirroredExp needs theta > 0, got {self.theta}")

    @property
    def support(self):
        return (-math.inf, 0.0)

    @property
    def alpha(self):
        return 1.0

    def _cdf(self, y):
        return np.exp(self.theta * y)

    def _quantile(self, u):
        return np.log(u) / self.theta


@dataclass(frozen=True)
class UniformSym(ErrorLaw):
    """Uniform law on ``[-theta, theta]``."""

    theta: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError(f"UniformSym needs theta > 0, got {self.theta}")

    @property
    def support(self):
        return (-float(self.theta), float(self.theta))

    @property
    def alpha(self):
        return 1.0

    def _cdf(self, y):
        return (y + self.theta) / (2.0 * self.theta)

    def _quantile(self, u):
        return self.theta * (2.0 * u - 1.0)


@dataclass(frozen=True)
class PolyBump(ErrorLaw):
    """Symmetric law on ``[-1, 1]`` with density ``(zeta+1)/2 * (1-|y|)**zeta``.

    ``zeta = 0`` is the uniform law on ``[-1, 1]``.
    """

    zeta: float = 0.0

    def __post_init__(self):
        if not self.zeta > -1:
            raise DomainError(f"PolyBump needs zeta > -1, got {self.zeta}")

    @property
    def support(self):
        return (-1.0, 1.0)

    @property
    def alpha(self):
        return float(self.zeta) + 1.0

    def density(self, y):
        y = np.asarray(y, dtype=float)
        inside = np.abs(y) <= 1
        return np.where(inside, 0.5 * (self.zeta + 1.0) * np.clip(1.0 - np.abs(y), 0, None) ** self.zeta, 0.0)

    def _cdf(self, y):
        k = self.zeta + 1.0
        return np.where(y <= 0, 0.5 * (1.0 + y) ** k, 1.0 - 0.5 * (1.0 - y) ** k)

    def _quantile(self, u):
        k = 1.0 / (self.zeta + 1.0)
        lower = (2.0 * np.minimum(u, 0.5)) ** k - 1.0
        upper = 1.0 - (2.0 * (1.0 - np.maximum(u, 0.5))) ** k
        return np.where(u <= 0.5, lower, upper)


@dataclass(frozen=True)
class PointMass(ErrorLaw):
    """Degenerate zero-noise law (all errors equal 0); used for smoke checks."""

    one_sided = True

    @property
    def support(self):
        return (0.0, 0.0)

    @property
    def alpha(self):
        return math.inf

    def cdf(self, y):
        out = np.where(np.asarray(y, dtype=float) >= 0, 1.0, 0.0)
        return out if out.ndim else float(out)

    def _quantile(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))


def cdf(law, y):
    return law.cdf(y)


def quantile(law, u):
    return law.quantile(u)


def alpha_of(law):
    """Extreme-value index of ``law`` at the upper endpoint of its support."""
    return law.alpha


def make_law(name, **params):
    """Build a law from its config name (``powertail``, ``mexp``, ``uniform``, ``polybump``, ``zero``)."""
    key = name.strip().lower()
    if key in ("powertail", "power_tail"):
        return PowerTail(float(params.get("alpha", 1.0)))
    if key in ("mexp", "mirrored_exp", "mirroredexp"):
        return MirroredExp(float(params.get("theta", 1.0)))
    if key in ("uniform", "uniform_sym", "uniformsym"):
        return UniformSym(float(params.get("theta", 1.0)))
    if key in ("polybump", "poly_bump"):
        return PolyBump(float(params.get("zeta", 0.0)))
    if key in ("zero", "pointmass", "none"):
        return PointMass()
    raise DomainError(f"unknown error law {name!r}")


def sample_errors(law, n, seed=0):
    """Draw ``n`` i.i.d. errors from ``law`` by inverse-cdf sampling.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    rng = as_generator(seed)
    # 1 - U lies in (0, 1]; the upper end maps to the support's right endpoint
    u = 1.0 - rng.random(n)
    if isinstance(law, PointMass):
        return np.zeros(n)
    lo, hi = law.support
    u = np.clip(u, np.nextafter(0.0, 1.0), 1.0)
    interior = u < 1.0
    out = np.full(n, hi, dtype=float)
    if interior.any():
        out[interior] = law._quantile(u[interior])
    return np.clip(out, lo, hi)


@dataclass(frozen=True)
class RegressionTruth:
    """Known regression function used in simulations.

    ``beta`` and ``holder_const`` are metadata describing the smoothness the
    function is meant to represent.
    """

    func: Callable[[np.ndarray], np.ndarray]
    beta: float = 2.0
    holder_const: Optional[float] = None
    name: str = "custom"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.func(x), dtype=float) + np.zeros_like(x)


def sine_linear(x):
    return 0.5 * np.sin(2.0 * np.pi * x) + 4.0 * x


def parabola(x):
    return 8.0 * x**2


TRUTHS = {
    "sine_linear": (sine_linear, 2.0),
    "parabola": (parabola, 2.0),
    "zero": (lambda x: np.zeros_like(x), 2.0),
    "linear": (lambda x: 4.0 * x, 2.0),
    "sine": (lambda x: np.sin(2.0 * np.pi * x), 2.0),
}


def make_truth(name, beta=None):
    try:
        func, default_beta = TRUTHS[name]
    except KeyError:
        raise DomainError(f"unknown regression function {name!r}; choose from {sorted(TRUTHS)}") from None
    return RegressionTruth(func, beta=float(default_beta if beta is None else beta), name=name)


@dataclass(frozen=True)
class Sample:
    """Responses at the fixed design points ``i/n``, ``i = 1..n``."""

    ys: np.ndarray = field(repr=False)

    def __post_init__(self):
        ys = np.array(self.ys, dtype=float)
        if ys.ndim != 1 or ys.size < 2:
            raise DomainError("a sample needs at least two responses")
        ys.setflags(write=False)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self):
        return self.ys.size

    @property
    def design(self):
        return design_points(self.n)


def design_points(n):
    return np.arange(1, n + 1, dtype=float) / n


def generate_sample(truth, law, n, seed=0):
    n = int(n)
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    eps = sample_errors(law, n, seed)
    return Sample(truth(design_points(n)) + eps)
