"""Seeded Monte-Carlo studies: rates, residual-EDF equivalence, bias profile, power.

An experiment is described by a small TOML file with one ``[kind]`` section::

    [power]
    seed = 0
    replicates = 200
    n = [50, 100, 200]
    zeta = [0.0, 0.5, 1.0, 1.5]
    h_rule = "power"
    h_const = 0.6
    h_exp = "-1/3"

Replicate ``r`` of every cell draws from its own counter-based stream keyed
by ``(seed, r, study, n, ...)``, so results are identical for any number of
worker processes.
"""

import json
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ._version import __version__
from .estimators import (
    bias_corrected_smooth,
    center_draws,
    default_grid,
    fit_boundary,
    interior_design_grid,
    optimal_bandwidth,
    smooth_boundary,
)
from .exceptions import ConfigError, DomainError
from .gof import (
    applicability_report,
    critical_value,
    critical_value_from_statistics,
    expansion_remainder,
    gof_test,
    interior_mask,
    NullSpec,
    parse_cv_mode,
    pipeline_statistic,
    residuals,
    simulate_null_statistics,
    sup_edf_diff,
)
from .kernels import build_kernel, kernel_order_for
from .model import PolyBump, TRUTHS, design_points, make_law, make_truth, replicate_rng, sample_errors

SEED_ENV = "FRONTIER_LAB_SEED"

KINDS = ("power", "rates", "edf_equivalence", "bias_profile")
KIND_ALIASES = {"edf": "edf_equivalence", "bias": "bias_profile"}

# stream tags keep the studies' random numbers apart
_POWER_DATA, _POWER_CV, _RATES, _EDF, _EDF_BIAS, _BIAS, _POWER_BOOT = range(7)

_COMMON_KEYS = {"seed", "replicates", "n", "law", "alpha", "theta", "truth", "beta",
                "h_rule", "h_const", "h_exp", "output", "objective"}
_KIND_KEYS = {
    "power": _COMMON_KEYS | {"zeta", "level", "test", "cv", "cv_truth"},
    "rates": set(_COMMON_KEYS),
    "edf_equivalence": _COMMON_KEYS | {"b_factor", "kappa", "bias_replicates", "y_points", "edf_reference"},
    "bias_profile": set(_COMMON_KEYS),
}

_DEFAULTS = {
    "power": dict(law="polybump", truth="sine_linear", n=(50, 100, 200), zeta=(0.0, 0.5, 1.0, 1.5),
                  h_rule="power", h_const=0.6, h_exp=Fraction(-1, 3), replicates=200, cv="mc:200"),
    "rates": dict(truth="parabola", n=(250, 500, 1000, 2000, 4000), replicates=200),
    "edf_equivalence": dict(truth="linear", n=(500, 1000, 2000, 4000), replicates=200),
    "bias_profile": dict(truth="zero", n=(250, 500, 1000, 2000, 4000), h_rule="power", h_const=0.25,
                         h_exp=Fraction(0), replicates=1000),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``h_rule`` is ``"optimal"`` (``optimal_bandwidth(alpha, beta, n)``) or
    ``"power"`` (``h_const * n**h_exp``).  ``law``/``alpha``/``theta``
    describe the error law; the power study always uses ``PolyBump(zeta)``.
    """

    kind: str
    seed: int = 0
    replicates: int = 200
    n: tuple = (500, 1000, 2000, 4000)
    law: str = "powertail"
    alpha: float = 1.0
    theta: float = 1.0
    truth: str = "linear"
    beta: float = 2.0
    h_rule: str = "optimal"
    h_const: float = 1.0
    h_exp: Fraction = Fraction(-1, 3)
    output: str = "results"
    objective: str = "integral"
    zeta: tuple = ()
    level: float = 0.05
    test: str = "cvm"
    cv: str = "mc:200"
    cv_truth: str = "fitted"
    b_factor: float = 0.5
    kappa: float = -0.1
    bias_replicates: int = 1000
    y_points: int = 181
    edf_reference: str = "all"
    seed_source: str = field(default="default", compare=False)

    def bandwidth(self, n):
        if self.h_rule == "optimal":
            alpha = self.alpha if self.kind == "power" else self.error_law().alpha
            return optimal_bandwidth(alpha, self.beta, n)
        return float(self.h_const) * float(n) ** float(self.h_exp)

    def error_law(self, zeta=None):
        if self.kind == "power":
            return PolyBump(0.0 if zeta is None else zeta)
        return make_law(self.law, alpha=self.alpha, theta=self.theta)

    def keys(self):
        return sorted(_KIND_KEYS[self.kind])


def _line_of(text, key=None, section=None):
    pattern = rf"^\s*\[\s*{re.escape(section)}\s*\]" if section else rf"^\s*{re.escape(key)}\s*="
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(pattern, line):
            return i
    return None


def _as_fraction(value, key, line):
    try:
        if isinstance(value, str):
            return Fraction(value.strip())
        return Fraction(value).limit_denominator(10**9) if isinstance(value, float) else Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ConfigError(f"{key}: expected a number or a fraction like '-1/3', got {value!r}", line) from None


def _number(value, key, line, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}", line)
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {value!r}", line)
        return int(value)
    return float(value)


def parse_config_text(text):
    """Parse and validate a config document; see :func:`parse_config`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed config: {exc}", int(m.group(1)) if m else None) from None
    stray = [k for k, v in doc.items() if not isinstance(v, dict)]
    if stray:
        raise ConfigError(f"key {stray[0]!r} outside a [kind] section", _line_of(text, stray[0]))
    if len(doc) != 1:
        raise ConfigError(f"expected exactly one [kind] section, found {len(doc)}")
    (section, body), = doc.items()
    kind = KIND_ALIASES.get(section, section)
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind [{section}]; choose from {list(KINDS)}",
                          _line_of(text, section=section))
    allowed = _KIND_KEYS[kind]
    for key in body:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} for [{section}]", _line_of(text, key))

    values = dict(_DEFAULTS[kind])
    line = lambda k: _line_of(text, k)  # noqa: E731
    for key, raw in body.items():
        ln = line(key)
        if key in ("seed", "replicates", "bias_replicates", "y_points"):
            values[key] = _number(raw, key, ln, integer=True)
        elif key in ("alpha", "theta", "beta", "h_const", "level", "b_factor", "kappa"):
            values[key] = _number(raw, key, ln)
        elif key == "h_exp":
            values[key] = _as_fraction(raw, key, ln)
        elif key == "n":
            if not isinstance(raw, list) or not raw:
                raise ConfigError("n: expected a non-empty list of sample sizes", ln)
            values[key] = tuple(_number(v, key, ln, integer=True) for v in raw)
        elif key == "zeta":
            if not isinstance(raw, list) or not raw:
                raise ConfigError("zeta: expected a non-empty list", ln)
            values[key] = tuple(_number(v, key, ln) for v in raw)
        else:
            if not isinstance(raw, str):
                raise ConfigError(f"{key}: expected a string, got {raw!r}", ln)
            values[key] = raw.strip()
    values["seed_source"] = "config" if "seed" in body else "default"
    cfg = ExperimentConfig(kind=kind, **values)
    _validate(cfg, line)
    return cfg


def _validate(cfg, line):
    if cfg.replicates < 1:
        raise ConfigError("replicates must be >= 1", line("replicates"))
    if cfg.seed < 0:
        raise ConfigError("seed must be >= 0", line("seed"))
    if any(n < 10 for n in cfg.n):
        raise ConfigError("every n must be >= 10", line("n"))
    if len(set(cfg.n)) != len(cfg.n):
        raise ConfigError("n values must be distinct", line("n"))
    if cfg.h_rule not in ("optimal", "power"):
        raise ConfigError(f"h_rule must be 'optimal' or 'power', got {cfg.h_rule!r}", line("h_rule"))
    if not cfg.beta > 0:
        raise ConfigError("beta must be > 0", line("beta"))
    if cfg.truth not in TRUTHS:
        raise ConfigError(f"unknown truth {cfg.truth!r}; choose from {sorted(TRUTHS)}", line("truth"))
    if cfg.objective not in ("integral", "riemann"):
        raise ConfigError("objective must be 'integral' or 'riemann'", line("objective"))
    if cfg.kind == "power" and cfg.law != "polybump":
        raise ConfigError("the power study draws PolyBump(zeta) errors; law must be 'polybump'", line("law"))
    try:
        if cfg.kind == "power":
            for z in cfg.zeta:
                PolyBump(z)
        else:
            law = cfg.error_law()
    except DomainError as exc:
        raise ConfigError(str(exc), line("law") or line("alpha") or line("theta") or line("zeta")) from None
    if cfg.kind != "power" and cfg.h_rule == "optimal" and not math.isfinite(law.alpha):
        raise ConfigError("optimal bandwidth needs a law with finite alpha; use h_rule = 'power'", line("h_rule"))
    for n in cfg.n:
        h = cfg.bandwidth(n)
        if not 0 < h < 0.5:
            raise ConfigError(f"bandwidth rule gives h = {h:.4g} outside (0, 1/2) for n = {n}",
                              line("h_const") or line("h_rule") or line("n"))
    if cfg.kind == "power":
        if not 0 < cfg.level < 1:
            raise ConfigError("level must lie in (0, 1)", line("level"))
        if cfg.test not in ("ks", "cvm"):
            raise ConfigError("test must be 'ks' or 'cvm'", line("test"))
        try:
            parse_cv_mode(cfg.cv)
        except DomainError as exc:
            raise ConfigError(str(exc), line("cv")) from None
        if cfg.cv == "asymptotic" and cfg.test == "cvm":
            raise ConfigError("the CvM test with estimated parameter needs cv = 'mc:R'", line("cv"))
        if cfg.cv_truth not in ("fitted", "zero"):
            raise ConfigError("cv_truth must be 'fitted' or 'zero'", line("cv_truth"))
    if cfg.kind == "edf_equivalence":
        if not cfg.b_factor > 0:
            raise ConfigError("b_factor must be > 0", line("b_factor"))
        if not cfg.kappa < 0:
            raise ConfigError("kappa must be < 0", line("kappa"))
        if cfg.bias_replicates < 1 or cfg.y_points < 2:
            raise ConfigError("bias_replicates must be >= 1 and y_points >= 2",
                              line("bias_replicates") or line("y_points"))
        if cfg.edf_reference not in ("all", "interior"):
            raise ConfigError("edf_reference must be 'all' or 'interior'", line("edf_reference"))
        for n in cfg.n:
            h = cfg.bandwidth(n)
            if h + cfg.b_factor * h >= 0.5:
                raise ConfigError(f"h + b >= 1/2 for n = {n}; lower b_factor or h", line("b_factor") or line("n"))


def parse_config(path):
    """Read an experiment config file.

    Unknown keys, malformed values and out-of-range settings raise
    :class:`ConfigError` naming the offending line.  A missing ``seed``
    defaults to 0.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f'"{v}"'
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return json.dumps(v)


def serialize_config(cfg):
    """Inverse of :func:`parse_config_text` (all keys of the kind written)."""
    lines = [f"[{cfg.kind}]"]
    for key in cfg.keys():
        lines.append(f"{key} = {_toml_value(getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def apply_seed_override(cfg, environ=None):
    """Replace the seed by ``FRONTIER_LAB_SEED`` when that variable is set."""
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV)
    if raw is None or raw == "":
        return cfg
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be >= 0")
    return replace(cfg, seed=seed, seed_source="env")


@dataclass
class MonteCarloResult:
    """Per-cell table of a study plus fitted summaries.

    ``rows`` follow ``columns``; ``summary`` holds slopes, verdicts and
    flags; ``labels`` lists applicability warnings.
    """

    kind: str
    columns: tuple
    rows: list
    summary: dict
    config: ExperimentConfig
    labels: list = field(default_factory=list)
    wall_time: float = 0.0

    def column(self, name):
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows])


# --------------------------------------------------------------------------
# parallel plumbing


def _chunks(R, threads):
    size = max(1, math.ceil(R / (4 * max(1, threads))))
    return [np.arange(s, min(R, s + size)) for s in range(0, R, size)]


def _run_chunks(fn, args, R, threads):
    """Evaluate ``fn(*args, indices)`` over all replicates, concatenated in index order."""
    parts = _chunks(int(R), threads)
    if threads <= 1 or len(parts) == 1:
        out = [fn(*args, idx) for idx in parts]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(fn, *zip(*[(*args, idx) for idx in parts])))
    return np.concatenate(out, axis=0)


def ols_slope(x, y):
    """Least-squares slope of ``y`` on ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _fit_slope(x, y, summary, theory):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    summary["theory_slope"] = theory
    if x.size < 4:
        summary.update(slope=None, deviation=None, slope_flag="fewer than 4 n values")
    elif np.any(~np.isfinite(y)) or np.any(y <= 1e-9):
        summary.update(slope=None, deviation=None, slope_flag="degenerate: error at machine precision")
    else:
        s = ols_slope(np.log(x), np.log(y))
        summary.update(slope=s, deviation=s - theory, slope_flag="")


def _strictly_decreasing(values):
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


# --------------------------------------------------------------------------
# workers (module level so they pickle)


def _power_worker(truth, zeta, zeta_index, n, h, beta, test, objective, seed, indices):
    x = design_points(n)
    g = make_truth(truth)(x)
    law = PolyBump(zeta)
    out = np.empty(indices.size)
    for j, r in enumerate(indices):
        ys = g + sample_errors(law, n, replicate_rng(seed, r, _POWER_DATA, n, zeta_index))
        out[j] = pipeline_statistic(ys, "uniform_sym", beta, h, test, objective)[1]
    return out


def _power_boot_worker(truth, zeta, zeta_index, n, h, beta, test, objective, level, R, seed, indices):
    """Statistic and bootstrap critical value per data set, each with its own bootstrap streams."""
    x = design_points(n)
    g = make_truth(truth)(x)
    law = PolyBump(zeta)
    out = np.empty((indices.size, 2))
    for j, r in enumerate(indices):
        ys = g + sample_errors(law, n, replicate_rng(seed, r, _POWER_DATA, n, zeta_index))
        res = gof_test(ys, "uniform_sym", beta, h, level, test, f"mc:{R}", seed, objective, "fitted",
                       (_POWER_BOOT, n, zeta_index, int(r)))
        out[j] = res.statistic, res.critical_value
    return out


def _cv_worker(test, n, h, beta, objective, seed, R, indices):
    spec = NullSpec("uniform_sym", n, 1.0, h, beta, True, None, objective)
    return simulate_null_statistics(test, spec, R, seed, (_POWER_CV, n), indices)


def _rate_worker(law, truth, n, h, beta, objective, seed, indices):
    tfun = make_truth(truth, beta)
    g = tfun(design_points(n))
    grid = default_grid(h, 1 - h)
    g_grid = tfun(grid)
    out = np.empty(indices.size)
    for j, r in enumerate(indices):
        ys = g + sample_errors(law, n, replicate_rng(seed, r, _RATES, n))
        fit = fit_boundary(ys, h, beta, grid, objective)
        out[j] = np.max(np.abs(fit.values - g_grid))
    return out


def _bias_worker(law, n, h, beta, objective, stream, seed, indices):
    return center_draws(law, n, h, beta, indices, seed, stream, objective)


def _edf_worker(law, truth, n, h, b, beta, objective, bias, kappa, y_points, reference, seed, indices):
    x = design_points(n)
    g = make_truth(truth, beta)(x)
    K = build_kernel(kernel_order_for(beta))
    lo = law.support[0] if math.isfinite(law.support[0]) else float(law.quantile(1e-6))
    y_grid = np.linspace(lo, kappa, int(y_points))
    grid = interior_design_grid(n, h, 1 - h)
    smask = interior_mask(n, h, b)
    xs = x[smask]
    out = np.empty((indices.size, 2))
    for j, r in enumerate(indices):
        eps = sample_errors(law, n, replicate_rng(seed, r, _EDF, n))
        ys = g + eps
        bfit = fit_boundary(ys, h, beta, grid, objective)
        res = residuals(ys, bfit, h)
        ref = eps if reference == "all" else eps[res.interior_mask]
        out[j, 0] = math.sqrt(res.m) * sup_edf_diff(res.interior, ref)
        sfit = bias_corrected_smooth(smooth_boundary(bfit, b, K, xs), bias)
        rem = expansion_remainder(sfit.values - g[smask], law, y_grid)
        out[j, 1] = math.sqrt(xs.size) * float(np.max(np.abs(rem)))
    return out


# --------------------------------------------------------------------------
# studies


def _check_kind(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError(f"expected a [{kind}] config, got [{cfg.kind}]")


def run_power_study(cfg, threads=1):
    """Rejection frequencies of the uniform-null test under ``PolyBump(zeta)`` errors.

    With ``cv = "mc:R"`` and ``cv_truth = "fitted"`` every data set gets its
    own parametric bootstrap of ``R`` replicates around the fitted model.
    ``cv_truth = "zero"`` instead shares one critical value per ``n``,
    simulated with the zero function and ``theta = 1``.  The reported
    ``critical_value`` is the median over data sets.
    """
    _check_kind(cfg, "power")
    t0 = time.perf_counter()
    mode, R_cv = parse_cv_mode(cfg.cv)
    rows = []
    cvs = {}
    for n in cfg.n:
        h = cfg.bandwidth(n)
        shared = None
        if mode == "asymptotic":
            spec = NullSpec("uniform_sym", n, 1.0, h, cfg.beta, False)
            shared = critical_value(cfg.test, spec, cfg.level, "asymptotic").value
        elif cfg.cv_truth == "zero":
            stats = _run_chunks(_cv_worker, (cfg.test, n, h, cfg.beta, cfg.objective, cfg.seed, R_cv), R_cv, threads)
            shared = critical_value_from_statistics(stats, cfg.level).value
        for k, zeta in enumerate(cfg.zeta):
            if shared is None:
                both = _run_chunks(_power_boot_worker, (cfg.truth, zeta, k, n, h, cfg.beta, cfg.test, cfg.objective,
                                                        cfg.level, R_cv, cfg.seed), cfg.replicates, threads)
                stats, crit = both[:, 0], both[:, 1]
            else:
                stats = _run_chunks(_power_worker, (cfg.truth, zeta, k, n, h, cfg.beta, cfg.test, cfg.objective,
                                                    cfg.seed), cfg.replicates, threads)
                crit = np.full(stats.size, shared)
            rejections = int(np.count_nonzero(stats > crit))
            cv_med = float(np.median(crit))
            cvs.setdefault(str(n), {})[str(zeta)] = cv_med
            rows.append((n, zeta, h, cfg.replicates, rejections, rejections / cfg.replicates, cv_med,
                         float(np.median(stats))))
    summary = {"critical_values": cvs, "cv_source": cfg.cv,
               "cv_truth": cfg.cv_truth if mode != "asymptotic" else "none"}
    columns = ("n", "zeta", "h", "replicates", "rejections", "frequency", "critical_value", "median_statistic")
    return MonteCarloResult("power", columns, rows, summary, cfg, [], time.perf_counter() - t0)


def run_rate_study(cfg, threads=1):
    """Median sup-grid error of the boundary fit and its log-log slope against ``log(n)/n``."""
    _check_kind(cfg, "rates")
    t0 = time.perf_counter()
    law = cfg.error_law()
    rows = []
    for n in cfg.n:
        h = cfg.bandwidth(n)
        err = _run_chunks(_rate_worker, (law, cfg.truth, n, h, cfg.beta, cfg.objective, cfg.seed),
                          cfg.replicates, threads)
        q25, med, q75 = np.quantile(err, [0.25, 0.5, 0.75])
        rows.append((n, h, cfg.replicates, math.log(n) / n, float(med), float(q25), float(q75), float(np.mean(err))))
    alpha = law.alpha
    theory = cfg.beta / (alpha * cfg.beta + 1.0) if math.isfinite(alpha) else float(cfg.beta)
    summary = {}
    _fit_slope([r[3] for r in rows], [r[4] for r in rows], summary, theory)
    columns = ("n", "h", "replicates", "rate_scale", "median_error", "q25_error", "q75_error", "mean_error")
    return MonteCarloResult("rates", columns, rows, summary, cfg, [], time.perf_counter() - t0)


def run_edf_equivalence_study(cfg, threads=1):
    """Residual-EDF equivalence and bias-corrected remainder, per ``n``.

    Tracks ``sqrt(m) * sup |F_hat - F_n|`` for the envelope residuals and
    ``sqrt(m) * max_{y <= kappa} |remainder(y)|`` for the smoothed, bias
    corrected fit with ``b = b_factor * h``.
    """
    _check_kind(cfg, "edf_equivalence")
    t0 = time.perf_counter()
    law = cfg.error_law()
    report = applicability_report(law.alpha, cfg.beta)
    labels = []
    if not report.residual_edf_equivalence:
        labels.append("edf track outside the residual-EDF equivalence region (1/beta < alpha < 2 - 1/beta)")
    if not report.remainder_bandwidths_exist:
        labels.append("remainder track outside the remainder-negligibility region (alpha < 3 - 3/(2 beta))")
    rows = []
    for n in cfg.n:
        h = cfg.bandwidth(n)
        b = cfg.b_factor * h
        draws = _run_chunks(_bias_worker, (law, n, h, cfg.beta, cfg.objective, (_EDF_BIAS, n), cfg.seed),
                            cfg.bias_replicates, threads)
        bias = float(np.mean(draws))
        stats = _run_chunks(_edf_worker, (law, cfg.truth, n, h, b, cfg.beta, cfg.objective, bias, cfg.kappa,
                                          cfg.y_points, cfg.edf_reference, cfg.seed), cfg.replicates, threads)
        m_res = int(interior_mask(n, h).sum())
        m_smooth = int(interior_mask(n, h, b).sum())
        rows.append((n, h, b, m_res, m_smooth, cfg.replicates, bias,
                     float(np.median(stats[:, 0])), float(np.median(stats[:, 1]))))
    summary = {
        "edf_strictly_decreasing": _strictly_decreasing(r[7] for r in rows),
        "remainder_strictly_decreasing": _strictly_decreasing(r[8] for r in rows),
        "applicability": asdict(report),
    }
    columns = ("n", "h", "b", "m_residual", "m_smooth", "replicates", "bias_g0", "median_edf_diff",
               "median_remainder")
    return MonteCarloResult("edf_equivalence", columns, rows, summary, cfg, labels, time.perf_counter() - t0)


def run_bias_profile(cfg, threads=1):
    """Zero-function bias of the envelope at 1/2 across ``n`` and its slope against ``log(n)/(n h)``.

    Standard errors above a quarter of the absolute bias are flagged.
    """
    _check_kind(cfg, "bias_profile")
    t0 = time.perf_counter()
    law = cfg.error_law()
    rows = []
    for n in cfg.n:
        h = cfg.bandwidth(n)
        draws = _run_chunks(_bias_worker, (law, n, h, cfg.beta, cfg.objective, (_BIAS, n), cfg.seed),
                            cfg.replicates, threads)
        value = float(np.mean(draws))
        se = float(np.std(draws, ddof=1) / math.sqrt(draws.size)) if draws.size > 1 else math.inf
        wide = bool(not se <= 0.25 * abs(value))
        rows.append((n, h, cfg.replicates, math.log(n) / (n * h), value, se, int(wide)))
    summary = {"wide_standard_errors": any(r[6] for r in rows)}
    theory = 1.0 / law.alpha if math.isfinite(law.alpha) else 0.0
    _fit_slope([r[3] for r in rows], [abs(r[4]) for r in rows], summary, theory)
    columns = ("n", "h", "replicates", "rate_scale", "bias", "standard_error", "wide_se")
    return MonteCarloResult("bias_profile", columns, rows, summary, cfg, [], time.perf_counter() - t0)


STUDIES = {
    "power": run_power_study,
    "rates": run_rate_study,
    "edf_equivalence": run_edf_equivalence_study,
    "bias_profile": run_bias_profile,
}


def run_experiment(cfg, threads=1):
    return STUDIES[cfg.kind](cfg, threads)


# --------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def svg_chart(title, xlabel, ylabel, series, logx=False, logy=False, width=480, height=320):
    """Static line chart as an SVG string; identical inputs give identical bytes.

    ``series`` is a list of ``(label, xs, ys)``.
    """
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = [[(tx(x), ty(y)) for x, y in zip(xs, ys) if (not logx or x > 0) and (not logy or y > 0)]
           for _, xs, ys in series]
    allx = [p[0] for s in pts for p in s] or [0.0, 1.0]
    ally = [p[1] for s in pts for p in s] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 60, 20, 30, 45
    pw, ph = width - left - right, height - top - bottom
    sx = lambda v: left + (v - x0) / (x1 - x0) * pw  # noqa: E731
    sy = lambda v: top + ph - (v - y0) / (y1 - y0) * ph  # noqa: E731
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        lx = f"{10 ** fx:.3g}" if logx else f"{fx:.3g}"
        ly = f"{10 ** fy:.3g}" if logy else f"{fy:.3g}"
        out.append(f'<text x="{sx(fx):.2f}" y="{top + ph + 14}" text-anchor="middle">{lx}</text>')
        out.append(f'<text x="{left - 4}" y="{sy(fy) + 4:.2f}" text-anchor="end">{ly}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, ((label, _, _), p) in enumerate(zip(series, pts)):
        c = colors[i % len(colors)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in p)
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}"/>')
        for a, b in p:
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="{c}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 14 + 13 * i}" fill="{c}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _charts(result):
    col = result.column
    if result.kind == "power":
        charts = {}
        for n in result.config.n:
            sel = [r for r in result.rows if r[0] == n]
            charts[f"power_n{n}.svg"] = svg_chart(
                f"Rejection frequency, n = {n}", "zeta", "frequency",
                [(f"n = {n}", [r[1] for r in sel], [r[5] for r in sel])])
        return charts
    if result.kind == "rates":
        return {"rates.svg": svg_chart("Median sup-grid error", "log(n)/n", "median error",
                                       [("median", col("rate_scale"), col("median_error"))], logx=True, logy=True)}
    if result.kind == "edf_equivalence":
        return {"edf_equivalence.svg": svg_chart(
            "Residual EDF equivalence", "n", "median (scaled)",
            [("sqrt(m) sup|F_hat - F_n|", col("n"), col("median_edf_diff")),
             ("sqrt(m) max remainder", col("n"), col("median_remainder"))], logx=True, logy=True)}
    return {"bias_profile.svg": svg_chart("Zero-function bias at 1/2", "log(n)/(n h)", "|bias|",
                                          [("|bias|", col("rate_scale"), np.abs(col("bias")))],
                                          logx=True, logy=True)}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v


def write_results(result, out_dir):
    """Write ``<kind>.csv``, SVG charts and the ``<kind>.meta.json`` sidecar.

    The CSV and SVG files depend only on the config and seed.  The sidecar
    also records the wall time, so it differs between runs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out / f"{result.kind}.csv"
    lines = [",".join(result.columns)] + [",".join(_fmt(v) for v in row) for row in result.rows]
    csv_path.write_text("\n".join(lines) + "\n")
    written.append(csv_path)
    for name, svg in _charts(result).items():
        p = out / name
        p.write_text(svg)
        written.append(p)
    cfg = result.config
    meta = {
        "kind": result.kind,
        "version": __version__,
        "seed": cfg.seed,
        "seed_source": cfg.seed_source,
        "stream_key": "replicate_rng(seed, replicate, study, n, ...)",
        "wall_time_seconds": round(result.wall_time, 3),
        "rows": len(result.rows),
        "summary": _jsonable(result.summary),
        "labels": list(result.labels),
        "config": _jsonable({f.name: getattr(cfg, f.name) for f in fields(cfg)}),
    }
    meta_path = out / f"{result.kind}.meta.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    written.append(meta_path)
    return written
